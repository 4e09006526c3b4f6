//! A small in-process MapReduce-style engine.
//!
//! A [`Dataset`] is an immutable, ordered list of partitions. Operators run
//! eagerly: each one processes partitions concurrently on the engine's worker
//! pool and returns only when every partition is done. Element functions must
//! be pure; results never depend on the number of workers.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap};
use std::hash::Hash;
use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineConfig {
    pub workers: usize,
    pub partitions: usize,
}

impl EngineConfig {
    pub fn new(workers: usize, partitions: usize) -> Self {
        EngineConfig { workers, partitions }
    }

    /// `workers` workers and two partitions per worker.
    pub fn with_workers(workers: usize) -> Self {
        EngineConfig {
            workers,
            partitions: 2 * workers.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers < 1 {
            return Err(Error::InvalidWorkers);
        }
        if self.partitions < 1 {
            return Err(Error::InvalidPartitions);
        }
        Ok(())
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig::with_workers(1)
    }
}

/// Handle to a worker pool. Cheap to clone; clones share the pool.
#[derive(Clone)]
pub struct Engine {
    config: EngineConfig,
    pool: Arc<ThreadPool>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("config", &self.config).finish()
    }
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self> {
        config.validate()?;
        let pool = ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .thread_name(|i| format!("kdmr-worker-{i}"))
            .build()?;
        Ok(Engine {
            config,
            pool: Arc::new(pool),
        })
    }

    pub fn config(&self) -> EngineConfig {
        self.config
    }

    pub fn workers(&self) -> usize {
        self.config.workers
    }

    /// Runs `f` inside the worker pool.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Distributes `items` over the configured number of partitions.
    pub fn parallelize<T>(&self, items: Vec<T>) -> Dataset<T> {
        self.chunked(items, self.config.partitions)
    }

    /// Splits `items` into `num_partitions` contiguous chunks whose sizes
    /// differ by at most one; earlier chunks take the remainder.
    pub fn from_items<T>(&self, items: Vec<T>, num_partitions: usize) -> Result<Dataset<T>> {
        if num_partitions < 1 {
            return Err(Error::InvalidPartitions);
        }
        Ok(self.chunked(items, num_partitions))
    }

    pub fn empty<T>(&self) -> Dataset<T> {
        Dataset {
            engine: self.clone(),
            parts: Vec::new(),
        }
    }

    fn chunked<T>(&self, items: Vec<T>, num_partitions: usize) -> Dataset<T> {
        let n = items.len();
        let base = n / num_partitions;
        let rem = n % num_partitions;
        let mut parts = Vec::with_capacity(num_partitions);
        let mut iter = items.into_iter();
        for i in 0..num_partitions {
            let size = base + usize::from(i < rem);
            parts.push(Arc::new(iter.by_ref().take(size).collect::<Vec<T>>()));
        }
        Dataset {
            engine: self.clone(),
            parts,
        }
    }

    fn from_parts<T>(&self, parts: Vec<Vec<T>>) -> Dataset<T> {
        Dataset {
            engine: self.clone(),
            parts: parts.into_iter().map(Arc::new).collect(),
        }
    }
}

/// Immutable partitioned collection. Logical content is the concatenation of
/// the partitions in order.
pub struct Dataset<T> {
    engine: Engine,
    parts: Vec<Arc<Vec<T>>>,
}

impl<T> Clone for Dataset<T> {
    fn clone(&self) -> Self {
        Dataset {
            engine: self.engine.clone(),
            parts: self.parts.clone(),
        }
    }
}

impl<T: std::fmt::Debug> std::fmt::Debug for Dataset<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.parts.iter()).finish()
    }
}

/// A dataset of `(key, value)` pairs.
pub type PairDataset<K, V> = Dataset<(K, V)>;

impl<T> Dataset<T> {
    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn num_partitions(&self) -> usize {
        self.parts.len()
    }

    pub fn partition(&self, index: usize) -> &[T] {
        &self.parts[index]
    }

    /// Concatenation: `self`'s partitions followed by `other`'s.
    pub fn union(&self, other: &Dataset<T>) -> Dataset<T> {
        let mut parts = self.parts.clone();
        parts.extend(other.parts.iter().cloned());
        Dataset {
            engine: self.engine.clone(),
            parts,
        }
    }
}

impl<T: Clone + Send + Sync> Dataset<T> {
    /// Element counts per partition, computed in parallel.
    pub fn partition_sizes(&self) -> Vec<usize> {
        self.engine
            .install(|| self.parts.par_iter().map(|p| p.len()).collect())
    }

    pub fn count(&self) -> usize {
        self.partition_sizes().into_iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(|p| p.is_empty())
    }

    pub fn collect(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.parts.iter().map(|p| p.len()).sum());
        for p in &self.parts {
            out.extend(p.iter().cloned());
        }
        out
    }

    pub fn first(&self) -> Option<T> {
        self.parts.iter().find_map(|p| p.first().cloned())
    }

    pub fn last(&self) -> Option<T> {
        self.parts.iter().rev().find_map(|p| p.last().cloned())
    }

    fn map_partitions<U: Send>(&self, f: impl Fn(&[T]) -> Vec<U> + Send + Sync) -> Dataset<U> {
        let parts: Vec<Vec<U>> = self
            .engine
            .install(|| self.parts.par_iter().map(|p| f(p)).collect());
        self.engine.from_parts(parts)
    }

    pub fn map<U: Send>(&self, f: impl Fn(&T) -> U + Send + Sync) -> Dataset<U> {
        self.map_partitions(|p| p.iter().map(&f).collect())
    }

    pub fn flat_map<U: Send, I>(&self, f: impl Fn(&T) -> I + Send + Sync) -> Dataset<U>
    where
        I: IntoIterator<Item = U>,
    {
        self.map_partitions(|p| p.iter().flat_map(&f).collect())
    }

    /// Order-preserving selection. Partition structure is kept even when a
    /// partition becomes empty.
    pub fn filter(&self, predicate: impl Fn(&T) -> bool + Send + Sync) -> Dataset<T> {
        self.map_partitions(|p| p.iter().filter(|x| predicate(x)).cloned().collect())
    }

    /// Redistributes elements into `num_partitions` contiguous chunks.
    pub fn repartition(&self, num_partitions: usize) -> Result<Dataset<T>> {
        self.engine.from_items(self.collect(), num_partitions)
    }

    /// Splits around the element at global position `index`.
    ///
    /// Partition counts are gathered in parallel and the owning partition is
    /// found by prefix sums. Partitions entirely on one side are shared as-is;
    /// the owning partition contributes a fragment to each side.
    pub fn split_at(&self, index: usize) -> Result<(Dataset<T>, T, Dataset<T>)> {
        let sizes = self.partition_sizes();
        let len: usize = sizes.iter().sum();
        if index >= len {
            return Err(Error::IndexOutOfRange { index, len });
        }
        let mut start = 0;
        let mut owner = 0;
        for (i, &s) in sizes.iter().enumerate() {
            if index < start + s {
                owner = i;
                break;
            }
            start += s;
        }
        let offset = index - start;
        let part = &self.parts[owner];
        let element = part[offset].clone();

        let mut less: Vec<Arc<Vec<T>>> = self.parts[..owner].to_vec();
        if offset > 0 {
            less.push(Arc::new(part[..offset].to_vec()));
        }
        let mut greater = Vec::with_capacity(self.parts.len() - owner);
        if offset + 1 < part.len() {
            greater.push(Arc::new(part[offset + 1..].to_vec()));
        }
        greater.extend(self.parts[owner + 1..].iter().cloned());

        let wrap = |parts| Dataset {
            engine: self.engine.clone(),
            parts,
        };
        Ok((wrap(less), element, wrap(greater)))
    }
}

impl<K, V> Dataset<(K, V)>
where
    K: Clone + Send + Sync,
    V: Clone + Send + Sync,
{
    pub fn keys(&self) -> Dataset<K> {
        self.map(|(k, _)| k.clone())
    }

    pub fn values(&self) -> Dataset<V> {
        self.map(|(_, v)| v.clone())
    }

    pub fn map_values<U: Send>(&self, f: impl Fn(&V) -> U + Send + Sync) -> Dataset<(K, U)> {
        self.map(|(k, v)| (k.clone(), f(v)))
    }

    /// Applies `f` to each value; every produced value is paired with the
    /// original key, in order.
    pub fn flat_map_values<U: Send, I>(&self, f: impl Fn(&V) -> I + Send + Sync) -> Dataset<(K, U)>
    where
        I: IntoIterator<Item = U>,
    {
        self.map_partitions(|p| {
            p.iter()
                .flat_map(|(k, v)| f(v).into_iter().map(move |u| (k.clone(), u)))
                .collect()
        })
    }

    /// Global ascending order by key: each partition is sorted in parallel,
    /// then the runs are merged. Equal keys keep their original order.
    pub fn sort_by_key(&self) -> Dataset<(K, V)>
    where
        K: Ord,
    {
        let runs: Vec<Vec<(K, V)>> = self.engine.install(|| {
            self.parts
                .par_iter()
                .map(|p| {
                    let mut run = p.to_vec();
                    run.sort_by(|a, b| a.0.cmp(&b.0));
                    run
                })
                .collect()
        });
        let merged = merge_runs(runs);
        self.engine.chunked(merged, self.parts.len().max(1))
    }

    /// Inner join. The right side is indexed by key; the left side is
    /// streamed, so output follows left order, and a left element matching
    /// several right elements yields them in right order.
    pub fn join<W>(&self, other: &Dataset<(K, W)>) -> Dataset<(K, (V, W))>
    where
        K: Hash + Eq,
        W: Clone + Send + Sync,
    {
        let mut index: HashMap<&K, Vec<&W>> = HashMap::new();
        for p in &other.parts {
            for (k, w) in p.iter() {
                index.entry(k).or_default().push(w);
            }
        }
        let index = &index;
        self.map_partitions(|p| {
            let mut out = Vec::new();
            for (k, v) in p {
                if let Some(ws) = index.get(k) {
                    out.extend(ws.iter().map(|&w| (k.clone(), (v.clone(), w.clone()))));
                }
            }
            out
        })
    }

    /// One pair per distinct key, keys ascending; each value list keeps the
    /// dataset order of that key's values.
    pub fn group_by_key(&self) -> Dataset<(K, Vec<V>)>
    where
        K: Ord,
    {
        let partials: Vec<BTreeMap<K, Vec<V>>> = self.engine.install(|| {
            self.parts
                .par_iter()
                .map(|p| {
                    let mut groups: BTreeMap<K, Vec<V>> = BTreeMap::new();
                    for (k, v) in p.iter() {
                        groups.entry(k.clone()).or_default().push(v.clone());
                    }
                    groups
                })
                .collect()
        });
        let mut merged: BTreeMap<K, Vec<V>> = BTreeMap::new();
        for groups in partials {
            for (k, mut vs) in groups {
                merged.entry(k).or_default().append(&mut vs);
            }
        }
        self.engine
            .chunked(merged.into_iter().collect(), self.parts.len().max(1))
    }
}

struct RunHead<K> {
    key: K,
    run: usize,
}

impl<K: Ord> PartialEq for RunHead<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<K: Ord> Eq for RunHead<K> {}

impl<K: Ord> PartialOrd for RunHead<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Ord> Ord for RunHead<K> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.cmp(&self.key).then(other.run.cmp(&self.run))
    }
}

fn merge_runs<K: Ord + Clone, V>(runs: Vec<Vec<(K, V)>>) -> Vec<(K, V)> {
    let total = runs.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(total);
    let mut iters: Vec<_> = runs.into_iter().map(|r| r.into_iter().peekable()).collect();
    let mut heap = BinaryHeap::with_capacity(iters.len());
    for (run, it) in iters.iter_mut().enumerate() {
        if let Some((k, _)) = it.peek() {
            heap.push(RunHead { key: k.clone(), run });
        }
    }
    while let Some(RunHead { run, .. }) = heap.pop() {
        let it = &mut iters[run];
        out.push(it.next().expect("run head present"));
        if let Some((k, _)) = it.peek() {
            heap.push(RunHead { key: k.clone(), run });
        }
    }
    out
}
