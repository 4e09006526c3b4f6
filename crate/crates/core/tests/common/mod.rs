#![allow(dead_code)]

use std::collections::BTreeMap;

use kdmr::{boxes_intersect, BBox, Engine, EngineConfig, Name};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random boxes on a coarse grid so that coordinate ties are common.
pub fn random_boxes(n: usize, seed: u64) -> Vec<BBox> {
    let mut r = rng(seed);
    let span = (n as f64).sqrt().ceil().max(2.0) * 4.0;
    (0..n)
        .map(|i| {
            let x = (r.gen_range(0.0..span) * 2.0).round() / 2.0;
            let y = (r.gen_range(0.0..span) * 2.0).round() / 2.0;
            let w = r.gen_range(0..8) as f64 * 0.5;
            let h = r.gen_range(0..8) as f64 * 0.5;
            BBox::new(i as u64 * 3 + 1, x, y, x + w, y + h).unwrap()
        })
        .collect()
}

pub fn engine(workers: usize, partitions: usize) -> Engine {
    Engine::new(EngineConfig::new(workers, partitions)).unwrap()
}

/// Pairwise scan, self excluded, empty lists omitted.
pub fn oracle(queries: &[BBox], tree: &[BBox]) -> BTreeMap<Name, Vec<Name>> {
    let mut out = BTreeMap::new();
    for q in queries {
        let mut hits: Vec<Name> = tree
            .iter()
            .filter(|b| b.name != q.name && boxes_intersect(q, b))
            .map(|b| b.name)
            .collect();
        if !hits.is_empty() {
            hits.sort_unstable();
            out.insert(q.name, hits);
        }
    }
    out
}

pub fn floor_log2(n: usize) -> usize {
    (usize::BITS - 1 - n.leading_zeros()) as usize
}
