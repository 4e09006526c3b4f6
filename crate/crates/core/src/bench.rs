//! Test data, the brute-force oracle, and timed build/search sweeps.
//!
//! Test data is a row of adjacent squares, each holding the same 16
//! rectangles. Nine of them overlap at least one other rectangle of their
//! square; nothing touches a neighbouring square.

use std::collections::BTreeMap;
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};

use crate::dataset::{Engine, EngineConfig};
use crate::distributed::{build_distributed_tree, build_distributed_tree_auto, DistributedTree};
use crate::error::{Error, Result};
use crate::fit::{fit_linear_nlogn, fit_scaling_model, FitResult};
use crate::geometry::{boxes_intersect, BBox, Name};
use crate::search::{run_search, search_dataset};

pub const BOXES_PER_SQUARE: usize = 16;
pub const INTERSECTING_PER_SQUARE: usize = 9;
pub const DEFAULT_SIDE: f64 = 100.0;

/// Rectangles of one square in hundredths of the side length. The square is
/// a 4×4 grid of 25-unit cells; every rectangle keeps at least 2 units from
/// its cell border. Cells (0,0), (1,1) and (2,2) each hold three mutually
/// overlapping rectangles; seven other cells hold one rectangle each.
const LAYOUT: [[u32; 4]; BOXES_PER_SQUARE] = [
    [3, 3, 13, 13],
    [9, 9, 19, 19],
    [5, 11, 15, 21],
    [28, 28, 40, 38],
    [33, 34, 44, 45],
    [30, 36, 36, 48],
    [53, 53, 63, 60],
    [58, 55, 70, 66],
    [55, 58, 61, 72],
    [29, 4, 45, 17],
    [56, 2, 60, 22],
    [79, 8, 96, 12],
    [2, 27, 23, 30],
    [52, 31, 71, 44],
    [77, 27, 81, 48],
    [10, 60, 17, 68],
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SquareGridSpec {
    pub squares: usize,
    pub side: f64,
}

impl SquareGridSpec {
    pub fn new(squares: usize) -> Self {
        SquareGridSpec {
            squares,
            side: DEFAULT_SIDE,
        }
    }
}

/// `16 · squares` boxes. Box `i` of square `s` is named `16 s + i` and
/// shifted by `s · side` along x.
pub fn generate_test_data(spec: &SquareGridSpec) -> Result<Vec<BBox>> {
    if spec.squares < 1 {
        return Err(Error::InvalidSquareCount);
    }
    if !(spec.side.is_finite() && spec.side > 0.0) {
        return Err(Error::InvalidArgument(format!("side {} must be positive", spec.side)));
    }
    let unit = |k: u32| spec.side * f64::from(k) / 100.0;
    let mut boxes = Vec::with_capacity(spec.squares * BOXES_PER_SQUARE);
    for s in 0..spec.squares {
        let dx = s as f64 * spec.side;
        for (i, r) in LAYOUT.iter().enumerate() {
            let name = (s * BOXES_PER_SQUARE + i) as u64;
            boxes.push(BBox::new(name, unit(r[0]) + dx, unit(r[1]), unit(r[2]) + dx, unit(r[3]))?);
        }
    }
    Ok(boxes)
}

/// All-pairs intersections, self excluded, boxes with no partner omitted.
pub fn brute_force_intersections(boxes: &[BBox]) -> BTreeMap<Name, Vec<Name>> {
    let mut out: BTreeMap<Name, Vec<Name>> = BTreeMap::new();
    for a in boxes {
        for b in boxes {
            if a.name != b.name && boxes_intersect(a, b) {
                out.entry(a.name).or_default().push(b.name);
            }
        }
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    out
}

/// True when exactly `9 · squares` queries have matches and the full result
/// map equals the brute-force oracle over `boxes`.
pub fn verify(results: &BTreeMap<Name, Vec<Name>>, boxes: &[BBox], squares: usize) -> bool {
    let nonempty = results.values().filter(|v| !v.is_empty()).count();
    if nonempty != INTERSECTING_PER_SQUARE * squares {
        return false;
    }
    let trimmed: BTreeMap<Name, Vec<Name>> = results
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| (*k, v.clone()))
        .collect();
    trimmed == brute_force_intersections(boxes)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Build,
    Search,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Build => "build",
            Phase::Search => "search",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchRecord {
    pub phase: Phase,
    pub n: usize,
    pub workers: usize,
    pub repeat: usize,
    pub seconds: f64,
}

/// How the distributed build picks its cutoff depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutoffChoice {
    Depth(usize),
    Auto,
}

pub fn build_with(engine: &Engine, boxes: &[BBox], cutoff: CutoffChoice) -> Result<DistributedTree> {
    match cutoff {
        CutoffChoice::Depth(d) => build_distributed_tree(engine, boxes, d),
        CutoffChoice::Auto => build_distributed_tree_auto(engine, boxes).map(|(t, _)| t),
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub repeats: usize,
    pub partitions: Option<usize>,
    pub cutoff: CutoffChoice,
}

fn engine_for(workers: usize, opts: &SweepOptions) -> Result<Engine> {
    let mut config = EngineConfig::with_workers(workers);
    if let Some(p) = opts.partitions {
        config.partitions = p;
    }
    Engine::new(config)
}

fn data_for_exponent(exp: u32) -> Result<Vec<BBox>> {
    if exp < 4 || exp > 30 {
        return Err(Error::InvalidArgument(format!(
            "size exponent {exp} outside 4..=30 (16 boxes per square)"
        )));
    }
    generate_test_data(&SquareGridSpec::new((1usize << exp) / BOXES_PER_SQUARE))
}

struct Prepared {
    engine: Engine,
    queries: crate::dataset::PairDataset<Name, BBox>,
    tree: Option<DistributedTree>,
}

impl Prepared {
    fn new(phase: Phase, engine: Engine, boxes: &[BBox], opts: &SweepOptions) -> Result<Self> {
        let tree = match phase {
            Phase::Search => Some(build_with(&engine, boxes, opts.cutoff)?),
            Phase::Build => None,
        };
        let queries = search_dataset(&engine, boxes);
        Ok(Prepared { engine, queries, tree })
    }

    /// Wall-clock seconds of one build or search call.
    fn time_once(&self, boxes: &[BBox], opts: &SweepOptions) -> Result<f64> {
        let start = Instant::now();
        match &self.tree {
            None => {
                std::hint::black_box(build_with(&self.engine, boxes, opts.cutoff)?);
            }
            Some(tree) => {
                std::hint::black_box(run_search(&self.queries, tree)?);
            }
        }
        Ok(start.elapsed().as_secs_f64())
    }
}

fn time_phase(phase: Phase, engine: &Engine, boxes: &[BBox], opts: &SweepOptions, out: &mut Vec<BenchRecord>) -> Result<()> {
    let prepared = Prepared::new(phase, engine.clone(), boxes, opts)?;
    for repeat in 0..opts.repeats {
        out.push(BenchRecord {
            phase,
            n: boxes.len(),
            workers: engine.workers(),
            repeat,
            seconds: prepared.time_once(boxes, opts)?,
        });
    }
    Ok(())
}

/// Times `phase` for `n = 2^min_exp ..= 2^max_exp` at a fixed worker count.
pub fn run_size_sweep(
    phase: Phase,
    min_exp: u32,
    max_exp: u32,
    workers: usize,
    opts: &SweepOptions,
) -> Result<Vec<BenchRecord>> {
    if min_exp > max_exp || opts.repeats < 1 {
        return Err(Error::InvalidArgument("empty sweep".into()));
    }
    let engine = engine_for(workers, opts)?;
    let mut out = Vec::new();
    for exp in min_exp..=max_exp {
        let boxes = data_for_exponent(exp)?;
        info!("{} sweep: n = {}", phase.as_str(), boxes.len());
        time_phase(phase, &engine, &boxes, opts, &mut out)?;
    }
    Ok(out)
}

/// Times build and search at `n = 2^exp` for `w = 1 ..= max_workers`.
///
/// Worker counts are interleaved within each repeat so that slow drift of
/// the machine affects every `w` alike.
pub fn run_scaling_sweep(exp: u32, max_workers: usize, opts: &SweepOptions) -> Result<Vec<BenchRecord>> {
    if max_workers < 1 || opts.repeats < 1 {
        return Err(Error::InvalidArgument("empty sweep".into()));
    }
    let boxes = data_for_exponent(exp)?;
    let mut prepared = Vec::with_capacity(2 * max_workers);
    for w in 1..=max_workers {
        let engine = engine_for(w, opts)?;
        for phase in [Phase::Build, Phase::Search] {
            prepared.push((phase, w, Prepared::new(phase, engine.clone(), &boxes, opts)?));
        }
    }
    let mut out = Vec::with_capacity(prepared.len() * opts.repeats);
    for repeat in 0..opts.repeats {
        info!("scaling sweep: repeat {repeat}");
        for (phase, workers, p) in &prepared {
            out.push(BenchRecord {
                phase: *phase,
                n: boxes.len(),
                workers: *workers,
                repeat,
                seconds: p.time_once(&boxes, opts)?,
            });
        }
    }
    out.sort_by_key(|r| (r.workers, r.phase, r.repeat));
    Ok(out)
}

/// Minimum time over repeats for each distinct `x` of one phase, where `x`
/// is chosen by `axis` (box count or workers). Sorted by `x`.
pub fn min_over_repeats(records: &[BenchRecord], phase: Phase, axis: impl Fn(&BenchRecord) -> usize) -> Vec<(f64, f64)> {
    let mut best: BTreeMap<usize, f64> = BTreeMap::new();
    for r in records.iter().filter(|r| r.phase == phase) {
        let e = best.entry(axis(r)).or_insert(f64::INFINITY);
        *e = e.min(r.seconds);
    }
    best.into_iter().map(|(x, t)| (x as f64, t)).collect()
}

pub fn phases_present(records: &[BenchRecord]) -> Vec<Phase> {
    let mut p: Vec<Phase> = records.iter().map(|r| r.phase).collect();
    p.sort();
    p.dedup();
    p
}

/// `n log2 n` fit per phase.
pub fn fit_size_records(records: &[BenchRecord]) -> Result<Vec<(Phase, FitResult)>> {
    phases_present(records)
        .into_iter()
        .map(|phase| Ok((phase, fit_linear_nlogn(&min_over_repeats(records, phase, |r| r.n))?)))
        .collect()
}

/// Worker-scaling fit per phase.
pub fn fit_scaling_records(records: &[BenchRecord]) -> Result<Vec<(Phase, FitResult)>> {
    phases_present(records)
        .into_iter()
        .map(|phase| Ok((phase, fit_scaling_model(&min_over_repeats(records, phase, |r| r.workers))?)))
        .collect()
}
