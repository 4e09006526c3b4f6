//! Least-squares fits for the benchmark sweeps.
//!
//! Two models, both linear in their parameters:
//!
//! * `t = m · n log2 n + t_S` for time against problem size;
//! * `t = t_s + t_p / w + m_c (w − 1)` for time against worker count.
//!
//! `r` is the Pearson correlation between observed and fitted times.

use std::fmt;

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FitModel {
    NLogN,
    Scaling,
}

impl FitModel {
    pub fn as_str(self) -> &'static str {
        match self {
            FitModel::NLogN => "nlogn",
            FitModel::Scaling => "scaling",
        }
    }

    fn regressors(self, x: f64) -> Vec<f64> {
        match self {
            FitModel::NLogN => vec![x * x.log2(), 1.0],
            FitModel::Scaling => vec![1.0, 1.0 / x, x - 1.0],
        }
    }

    fn param_names(self) -> &'static [&'static str] {
        match self {
            FitModel::NLogN => &["m", "t_S"],
            FitModel::Scaling => &["t_s", "t_p", "m_c"],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub model: FitModel,
    pub params: Vec<(&'static str, f64)>,
    pub r: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }

    pub fn predict(&self, x: f64) -> f64 {
        self.model
            .regressors(x)
            .iter()
            .zip(&self.params)
            .map(|(r, (_, p))| r * p)
            .sum()
    }
}

impl fmt::Display for FitResult {
    /// `model,param,value` lines followed by `r,<value>`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, value) in &self.params {
            writeln!(f, "{},{},{}", self.model.as_str(), name, value)?;
        }
        write!(f, "r,{}", self.r)
    }
}

/// Pearson correlation; 0 when either side has no variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    if n < 2 {
        return 0.0;
    }
    let mean = |v: &[f64]| v[..n].iter().sum::<f64>() / n as f64;
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (da, db) = (a[i] - ma, b[i] - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa <= 0.0 || sbb <= 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

fn distinct_count(xs: impl Iterator<Item = f64>) -> usize {
    let mut v: Vec<f64> = xs.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

fn constant(ts: &[f64]) -> bool {
    ts.windows(2).all(|w| w[0] == w[1])
}

fn least_squares(model: FitModel, points: &[(f64, f64)]) -> Result<FitResult> {
    let names = model.param_names();
    let ts: Vec<f64> = points.iter().map(|p| p.1).collect();
    let rows: Vec<f64> = points.iter().flat_map(|p| model.regressors(p.0)).collect();
    let design = DMatrix::from_row_slice(points.len(), names.len(), &rows);
    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(max_sv > 0.0) || min_sv <= max_sv * 1e-12 {
        return Err(Error::Fit("singular design matrix"));
    }
    let beta = svd
        .solve(&DVector::from_vec(ts.clone()), 0.0)
        .map_err(|_| Error::Fit("least-squares solve failed"))?;
    let params: Vec<(&'static str, f64)> = names.iter().copied().zip(beta.iter().copied()).collect();
    if params.iter().any(|(_, v)| !v.is_finite()) {
        return Err(Error::Fit("non-finite coefficient"));
    }
    let fitted = design * beta;
    let r = pearson(&ts, fitted.as_slice());
    Ok(FitResult { model, params, r })
}

/// Fits `t = m · n log2 n + t_S` to `(n, t)` points.
pub fn fit_linear_nlogn(points: &[(f64, f64)]) -> Result<FitResult> {
    if distinct_count(points.iter().map(|p| p.0)) < 2 {
        return Err(Error::Fit("need at least two distinct sizes"));
    }
    if distinct_count(points.iter().map(|p| p.0 * p.0.log2())) < 2 {
        return Err(Error::Fit("regressor n log2 n has no variance"));
    }
    let ts: Vec<f64> = points.iter().map(|p| p.1).collect();
    if constant(&ts) {
        warn!("constant timings; reporting slope 0 and r = 0");
        return Ok(FitResult {
            model: FitModel::NLogN,
            params: vec![("m", 0.0), ("t_S", ts[0])],
            r: 0.0,
        });
    }
    least_squares(FitModel::NLogN, points)
}

/// Fits `t = t_s + t_p / w + m_c (w − 1)` to `(w, t)` points.
pub fn fit_scaling_model(points: &[(f64, f64)]) -> Result<FitResult> {
    if distinct_count(points.iter().map(|p| p.0)) < 3 {
        return Err(Error::Fit("need at least three distinct worker counts"));
    }
    if points.iter().any(|p| !(p.0 > 0.0)) {
        return Err(Error::Fit("worker counts must be positive"));
    }
    let fit = least_squares(FitModel::Scaling, points)?;
    if fit.r == 0.0 {
        warn!("degenerate scaling fit; r reported as 0");
    }
    Ok(fit)
}
