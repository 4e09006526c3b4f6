//! The k-d tree as a pair dataset of `(node name, TreeEntry)`.
//!
//! The upper levels are built by subdividing four sorted datasets (x_min,
//! y_min, x_max and y_max super keys). Because the first and last elements of
//! those datasets bound every box they hold, a child's region is known before
//! the child is built and nothing has to flow back up the recursion. At the
//! cutoff depth the x_min and y_min datasets are collected to arrays and the
//! subtree is handed to a worker thread that runs the in-memory build, while
//! the coordinator continues subdividing.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};
use log::debug;

use crate::dataset::{Dataset, Engine, PairDataset};
use crate::error::{Error, Result};
use crate::geometry::{ensure_unique_names, merge_region, BBox, Name, Region, SortKey};
use crate::memory::{build_memory_tree, presort, KdNode};

/// Cutoff that never collects: the whole tree is built on datasets.
pub const FULL_DATASET_PATH: usize = usize::MAX;

/// Link from a node to one child.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChildLink {
    pub name: Name,
    /// Region enclosing the child's whole subtree.
    pub region: Region,
}

/// Value half of a tree-graph element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeEntry {
    pub bbox: BBox,
    pub lt: Option<ChildLink>,
    pub gt: Option<ChildLink>,
}

impl TreeEntry {
    pub fn children(&self) -> impl Iterator<Item = &ChildLink> {
        self.lt.iter().chain(self.gt.iter())
    }
}

pub type TreeDataset = PairDataset<Name, TreeEntry>;

/// Tree graph plus the name of its root.
#[derive(Clone, Debug)]
pub struct DistributedTree {
    pub root: Option<Name>,
    pub entries: TreeDataset,
}

impl DistributedTree {
    /// Entries sorted by node name.
    pub fn sorted_entries(&self) -> Vec<(Name, TreeEntry)> {
        let mut v = self.entries.collect();
        v.sort_by_key(|(n, _)| *n);
        v
    }

    /// Wraps loaded entries, checking that they form a single tree.
    pub fn from_entries(engine: &Engine, entries: Vec<(Name, TreeEntry)>) -> Result<Self> {
        let root = find_root(&entries)?;
        Ok(DistributedTree {
            root,
            entries: engine.parallelize(entries),
        })
    }

    /// Number of levels, following child links from the root.
    pub fn depth(&self) -> usize {
        let entries = self.entries.collect();
        let index: HashMap<Name, &TreeEntry> = entries.iter().map(|(n, e)| (*n, e)).collect();
        let mut depth = 0;
        let mut level: Vec<Name> = self.root.into_iter().collect();
        while !level.is_empty() {
            depth += 1;
            level = level
                .iter()
                .filter_map(|n| index.get(n))
                .flat_map(|e| e.children().map(|c| c.name))
                .collect();
        }
        depth
    }
}

/// Four datasets holding the same boxes, each sorted by one super key.
#[derive(Clone, Debug)]
pub struct SortedBoxes {
    pub x_min: Dataset<BBox>,
    pub y_min: Dataset<BBox>,
    pub x_max: Dataset<BBox>,
    pub y_max: Dataset<BBox>,
}

impl SortedBoxes {
    pub fn by(&self, key: SortKey) -> &Dataset<BBox> {
        match key {
            SortKey::XMin => &self.x_min,
            SortKey::YMin => &self.y_min,
            SortKey::XMax => &self.x_max,
            SortKey::YMax => &self.y_max,
        }
    }

    fn from_fn(mut f: impl FnMut(SortKey) -> Dataset<BBox>) -> Self {
        SortedBoxes {
            x_min: f(SortKey::XMin),
            y_min: f(SortKey::YMin),
            x_max: f(SortKey::XMax),
            y_max: f(SortKey::YMax),
        }
    }

    pub fn region(&self) -> Result<Region> {
        region_from_sorted(&self.x_min, &self.y_min, &self.x_max, &self.y_max)
    }
}

/// Sorts the boxes four ways with the dataset engine.
pub fn four_way_presort(engine: &Engine, boxes: &[BBox]) -> Result<SortedBoxes> {
    ensure_unique_names(boxes)?;
    for b in boxes {
        b.validate()?;
    }
    Ok(SortedBoxes::from_fn(|key| {
        engine
            .parallelize(boxes.iter().map(|b| (b.key(key), *b)).collect())
            .sort_by_key()
            .values()
    }))
}

/// Region spanned by four sorted views of one box set: first x_min, first
/// y_min, last x_max, last y_max.
pub fn region_from_sorted(
    x_min: &Dataset<BBox>,
    y_min: &Dataset<BBox>,
    x_max: &Dataset<BBox>,
    y_max: &Dataset<BBox>,
) -> Result<Region> {
    let first = |d: &Dataset<BBox>| d.first().ok_or(Error::EmptyDataset);
    let last = |d: &Dataset<BBox>| d.last().ok_or(Error::EmptyDataset);
    Ok(Region::new(
        first(x_min)?.x_min,
        first(y_min)?.y_min,
        last(x_max)?.x_max,
        last(y_max)?.y_max,
    ))
}

/// Inputs to the hybrid cutoff rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffParams {
    /// Seconds per `n log2 n` when subdividing datasets.
    pub c_r: f64,
    /// Seconds per `n log2 n` when subdividing arrays.
    pub c_a: f64,
    pub workers: usize,
    pub n: usize,
}

/// Shallowest depth at which building a subtree from arrays beats one more
/// level of dataset subdivision: the least `d ≥ 0` with
/// `d > log2(n) - c_r / (c_a * w) - 1`.
pub fn cutoff_depth(p: &CutoffParams) -> Result<usize> {
    if p.n == 0 {
        return Err(Error::InvalidCutoff("n must be positive"));
    }
    if p.workers == 0 {
        return Err(Error::InvalidCutoff("workers must be positive"));
    }
    if !(p.c_r.is_finite() && p.c_a.is_finite() && p.c_r > 0.0 && p.c_a > 0.0) {
        return Err(Error::InvalidCutoff("c_r and c_a must be positive and finite"));
    }
    let bound = (p.n as f64).log2() - p.c_r / (p.c_a * p.workers as f64) - 1.0;
    if bound < 0.0 {
        Ok(0)
    } else {
        Ok(bound.floor() as usize + 1)
    }
}

const ARRAY_SAMPLE: usize = 1024;
const ARRAY_REPEATS: usize = 5;

/// Times one dataset subdivision at the root and a small array build, and
/// converts both to per-`n log2 n` constants.
pub fn measure_cutoff_params(engine: &Engine, sorted: &SortedBoxes) -> Result<CutoffParams> {
    let n = sorted.x_min.count();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    let workers = engine.workers();

    let start = Instant::now();
    let (lo, median, _hi) = sorted.x_min.split_at(n / 2)?;
    let pivot = median.key(SortKey::XMin);
    for key in [SortKey::YMin, SortKey::XMax, SortKey::YMax] {
        let ds = sorted.by(key);
        let l = ds.filter(move |b| b.key(SortKey::XMin) < pivot);
        let g = ds.filter(move |b| b.key(SortKey::XMin) > pivot);
        std::hint::black_box((l.count(), g.count()));
    }
    std::hint::black_box(lo.count());
    let level = start.elapsed().as_secs_f64();
    // one level costs c_r * n / w
    let c_r = level * workers as f64 / n as f64;

    let m = n.clamp(2, ARRAY_SAMPLE);
    let sample: Vec<BBox> = if n >= 2 {
        sorted.x_min.collect().into_iter().take(m).collect()
    } else {
        let b = sorted.x_min.first().ok_or(Error::EmptyDataset)?;
        vec![b, b.translated(Name(b.name.0.wrapping_add(1)), 0.0, 0.0)]
    };
    let (xs, ys) = presort(&sample)?;
    let mut best = Duration::MAX;
    for _ in 0..ARRAY_REPEATS {
        let t = Instant::now();
        std::hint::black_box(build_memory_tree(&xs, &ys, 0));
        best = best.min(t.elapsed());
    }
    let mf = m as f64;
    let c_a = (best.as_secs_f64() / (mf * mf.log2())).max(f64::MIN_POSITIVE);
    let c_r = c_r.max(f64::MIN_POSITIVE);
    Ok(CutoffParams { c_r, c_a, workers, n })
}

struct SubtreeJob {
    seq: usize,
    depth: usize,
    x_sorted: Vec<BBox>,
    y_sorted: Vec<BBox>,
}

struct Coordinator {
    cutoff: usize,
    upper: Vec<(Name, TreeEntry)>,
    jobs: Sender<SubtreeJob>,
    next_seq: usize,
}

impl Coordinator {
    fn subdivide(&mut self, sorted: SortedBoxes, depth: usize) -> Result<Option<Name>> {
        let axis = SortKey::split_axis(depth);
        let n = sorted.by(axis).count();
        if n == 0 {
            return Ok(None);
        }
        if depth >= self.cutoff {
            let x_sorted = sorted.x_min.collect();
            let y_sorted = sorted.y_min.collect();
            let root = match axis {
                SortKey::XMin => x_sorted[n / 2].name,
                _ => y_sorted[n / 2].name,
            };
            let seq = self.next_seq;
            self.next_seq += 1;
            self.jobs
                .send(SubtreeJob {
                    seq,
                    depth,
                    x_sorted,
                    y_sorted,
                })
                .expect("subtree workers outlive the coordinator");
            return Ok(Some(root));
        }

        let (lo, median, hi) = sorted.by(axis).split_at(n / 2)?;
        let pivot = median.key(axis);
        let side = |keep_less: bool, split_half: &Dataset<BBox>| {
            SortedBoxes::from_fn(|key| {
                if key == axis {
                    split_half.clone()
                } else if keep_less {
                    sorted.by(key).filter(move |b| b.key(axis) < pivot)
                } else {
                    sorted.by(key).filter(move |b| b.key(axis) > pivot)
                }
            })
        };
        let less = side(true, &lo);
        let greater = side(false, &hi);
        let lt_region = (!lo.is_empty()).then(|| less.region()).transpose()?;
        let gt_region = (!hi.is_empty()).then(|| greater.region()).transpose()?;
        drop(sorted);

        let lt_name = self.subdivide(less, depth + 1)?;
        let gt_name = self.subdivide(greater, depth + 1)?;
        let link = |name: Option<Name>, region: Option<Region>| {
            name.zip(region).map(|(name, region)| ChildLink { name, region })
        };
        self.upper.push((
            median.name,
            TreeEntry {
                bbox: median,
                lt: link(lt_name, lt_region),
                gt: link(gt_name, gt_region),
            },
        ));
        Ok(Some(median.name))
    }
}

fn subtree_worker(jobs: Receiver<SubtreeJob>) -> Vec<(usize, Vec<(Name, TreeEntry)>)> {
    let mut buffer = Vec::new();
    for job in jobs {
        let root = build_memory_tree(&job.x_sorted, &job.y_sorted, job.depth);
        let entries = root.as_deref().map(flatten_memory_subtree).unwrap_or_default();
        buffer.push((job.seq, entries));
    }
    buffer
}

/// Builds the tree graph. Levels shallower than `cutoff` subdivide datasets;
/// at `cutoff` the remaining boxes are collected and built in memory on one of
/// `engine.workers()` subtree threads. Every cutoff yields the same tree.
pub fn build_distributed_tree(engine: &Engine, boxes: &[BBox], cutoff: usize) -> Result<DistributedTree> {
    let sorted = four_way_presort(engine, boxes)?;
    build_from_sorted(engine, sorted, cutoff)
}

/// Measures [`CutoffParams`], picks the cutoff depth, then builds.
pub fn build_distributed_tree_auto(
    engine: &Engine,
    boxes: &[BBox],
) -> Result<(DistributedTree, Option<(CutoffParams, usize)>)> {
    let sorted = four_way_presort(engine, boxes)?;
    if boxes.is_empty() {
        return Ok((build_from_sorted(engine, sorted, 0)?, None));
    }
    let params = measure_cutoff_params(engine, &sorted)?;
    let cutoff = cutoff_depth(&params)?;
    debug!("auto cutoff: {params:?} -> depth {cutoff}");
    Ok((build_from_sorted(engine, sorted, cutoff)?, Some((params, cutoff))))
}

/// Builds from datasets that are already sorted four ways.
pub fn build_from_sorted(engine: &Engine, sorted: SortedBoxes, cutoff: usize) -> Result<DistributedTree> {
    let (tx, rx) = unbounded::<SubtreeJob>();
    let (root, upper, buffers) = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..engine.workers())
            .map(|_| {
                let rx = rx.clone();
                scope.spawn(move || subtree_worker(rx))
            })
            .collect();
        let mut coord = Coordinator {
            cutoff,
            upper: Vec::new(),
            jobs: tx,
            next_seq: 0,
        };
        let root = coord.subdivide(sorted, 0);
        let Coordinator { upper, jobs, .. } = coord;
        // closing the channel lets the subtree workers drain and exit
        drop(jobs);
        let buffers: Vec<_> = handles
            .into_iter()
            .flat_map(|h| h.join().expect("subtree worker panicked"))
            .collect();
        (root, upper, buffers)
    });
    let root = root?;

    let mut entries = upper;
    let mut buffers = buffers;
    buffers.sort_by_key(|(seq, _)| *seq);
    for (_, mut e) in buffers {
        entries.append(&mut e);
    }
    entries.sort_by_key(|(n, _)| *n);
    Ok(DistributedTree {
        root,
        entries: engine.parallelize(entries),
    })
}

/// One entry per node of a memory-resident (sub)tree, in pre-order.
pub fn flatten_memory_subtree(root: &KdNode) -> Vec<(Name, TreeEntry)> {
    let link = |c: &Option<Box<KdNode>>| {
        c.as_deref().map(|c| ChildLink {
            name: c.bbox.name,
            region: c.region,
        })
    };
    root.iter()
        .map(|node| {
            (
                node.bbox.name,
                TreeEntry {
                    bbox: node.bbox,
                    lt: link(&node.less),
                    gt: link(&node.greater),
                },
            )
        })
        .collect()
}

/// Checks that the entries form one tree and returns its root: every link
/// resolves, every node except the root is referenced exactly once, and every
/// node is reachable from the root.
pub fn find_root(entries: &[(Name, TreeEntry)]) -> Result<Option<Name>> {
    if entries.is_empty() {
        return Ok(None);
    }
    let mut index: HashMap<Name, &TreeEntry> = HashMap::with_capacity(entries.len());
    for (name, entry) in entries {
        if *name != entry.bbox.name {
            return Err(Error::MalformedTree(format!(
                "key {name} holds box {}",
                entry.bbox.name
            )));
        }
        if index.insert(*name, entry).is_some() {
            return Err(Error::MalformedTree(format!("node {name} appears twice")));
        }
    }
    let mut referenced = HashSet::with_capacity(entries.len());
    for (name, entry) in entries {
        for child in entry.children() {
            if !index.contains_key(&child.name) {
                return Err(Error::MalformedTree(format!(
                    "node {name} links to missing node {}",
                    child.name
                )));
            }
            if !referenced.insert(child.name) {
                return Err(Error::MalformedTree(format!(
                    "node {} has more than one parent",
                    child.name
                )));
            }
        }
    }
    let roots: Vec<Name> = entries
        .iter()
        .map(|(n, _)| *n)
        .filter(|n| !referenced.contains(n))
        .collect();
    let [root] = roots[..] else {
        return Err(Error::MalformedTree(format!(
            "expected one root, found {}",
            roots.len()
        )));
    };
    let mut reached = 0;
    let mut stack = vec![root];
    while let Some(n) = stack.pop() {
        reached += 1;
        stack.extend(index[&n].children().map(|c| c.name));
    }
    if reached != entries.len() {
        return Err(Error::MalformedTree("cycle detected".into()));
    }
    Ok(Some(root))
}

/// Rebuilds linked nodes from tree-graph entries. Node regions are recomputed
/// from the stored child regions.
pub fn relink(entries: &[(Name, TreeEntry)]) -> Result<Option<Box<KdNode>>> {
    let Some(root) = find_root(entries)? else {
        return Ok(None);
    };
    let index: HashMap<Name, &TreeEntry> = entries.iter().map(|(n, e)| (*n, e)).collect();
    fn node(index: &HashMap<Name, &TreeEntry>, name: Name) -> Box<KdNode> {
        let e = index[&name];
        let less = e.lt.map(|c| node(index, c.name));
        let greater = e.gt.map(|c| node(index, c.name));
        let region = merge_region(&e.bbox, e.children().map(|c| &c.region));
        Box::new(KdNode {
            bbox: e.bbox,
            less,
            greater,
            region,
        })
    }
    Ok(Some(node(&index, root)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::EngineConfig;
    use crate::memory::build_tree;

    fn engine(w: usize) -> Engine {
        Engine::new(EngineConfig::new(w, 3)).unwrap()
    }

    fn bx(name: u64, c: [f64; 4]) -> BBox {
        BBox::new(name, c[0], c[1], c[2], c[3]).unwrap()
    }

    fn names(ds: &Dataset<BBox>) -> Vec<u64> {
        ds.collect().iter().map(|b| b.name.0).collect()
    }

    #[test]
    fn four_way_orders() {
        // coordinates chosen so every order differs
        let boxes = [
            bx(0, [2., 0., 3., 9.]),
            bx(1, [0., 2., 9., 3.]),
            bx(2, [1., 1., 2., 10.]),
        ];
        let s = four_way_presort(&engine(2), &boxes).unwrap();
        assert_eq!(names(&s.x_min), vec![1, 2, 0]);
        assert_eq!(names(&s.y_min), vec![0, 2, 1]);
        assert_eq!(names(&s.x_max), vec![2, 0, 1]);
        assert_eq!(names(&s.y_max), vec![1, 0, 2]);
    }

    #[test]
    fn four_way_single_and_ties() {
        let s = four_way_presort(&engine(1), &[bx(5, [0., 0., 1., 1.])]).unwrap();
        for k in SortKey::ALL {
            assert_eq!(names(s.by(k)), vec![5]);
        }
        let same: Vec<BBox> = [3, 1, 2].iter().map(|&n| bx(n, [0., 0., 1., 1.])).collect();
        let s = four_way_presort(&engine(1), &same).unwrap();
        for k in SortKey::ALL {
            assert_eq!(names(s.by(k)), vec![1, 2, 3]);
        }
        let dup = bx(1, [0., 0., 1., 1.]);
        assert!(matches!(
            four_way_presort(&engine(1), &[dup, dup]),
            Err(Error::DuplicateName(_))
        ));
    }

    #[test]
    fn region_from_sorted_examples() {
        let e = engine(1);
        let s = four_way_presort(&e, &[bx(0, [0., 0., 1., 1.]), bx(1, [2., 2., 3., 3.])]).unwrap();
        assert_eq!(s.region().unwrap(), Region::new(0., 0., 3., 3.));
        let b = bx(0, [1., 2., 3., 4.]);
        let s = four_way_presort(&e, &[b]).unwrap();
        assert_eq!(s.region().unwrap(), b.region());
        let empty = e.empty::<BBox>();
        assert!(matches!(
            region_from_sorted(&empty, &empty, &empty, &empty),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn cutoff_examples() {
        let p = |ratio: f64, w| CutoffParams {
            c_r: ratio,
            c_a: 1.0,
            workers: w,
            n: 1 << 12,
        };
        assert_eq!(cutoff_depth(&p(200.0 / 0.122, 4)).unwrap(), 0);
        assert_eq!(cutoff_depth(&p(8.0, 1)).unwrap(), 4);
        // d > 12 - ε - 1 is first met at d = 11 for any positive ratio
        assert_eq!(cutoff_depth(&p(1e-12, 1)).unwrap(), 11);
        let mut exact = p(1.0, 1);
        exact.n = 1000;
        // log2(1000) - 1 - 1 = 7.97 -> 8
        assert_eq!(cutoff_depth(&exact).unwrap(), 8);
        let mut bad = p(8.0, 1);
        bad.n = 0;
        assert!(cutoff_depth(&bad).is_err());
    }

    #[test]
    fn one_box_one_entry() {
        let b = bx(9, [0., 0., 1., 1.]);
        for cutoff in [0, 1, FULL_DATASET_PATH] {
            let t = build_distributed_tree(&engine(2), &[b], cutoff).unwrap();
            assert_eq!(t.root, Some(Name(9)));
            assert_eq!(
                t.entries.collect(),
                vec![(Name(9), TreeEntry { bbox: b, lt: None, gt: None })]
            );
        }
    }

    #[test]
    fn empty_input_empty_tree() {
        let t = build_distributed_tree(&engine(2), &[], 0).unwrap();
        assert!(t.root.is_none());
        assert!(t.entries.is_empty());
    }

    #[test]
    fn seven_boxes_cutoff_invariant() {
        let boxes: Vec<BBox> = (0..7u64)
            .map(|i| {
                let x = ((i * 5) % 7) as f64;
                let y = ((i * 3) % 7) as f64;
                bx(i, [x, y, x + 1.5, y + 0.5])
            })
            .collect();
        let mut expect = flatten_memory_subtree(&build_tree(&boxes).unwrap().unwrap());
        expect.sort_by_key(|(n, _)| *n);
        for cutoff in [0, 3, 10] {
            let t = build_distributed_tree(&engine(2), &boxes, cutoff).unwrap();
            assert_eq!(t.sorted_entries(), expect, "cutoff {cutoff}");
            assert_eq!(t.depth(), 3);
        }
    }

    #[test]
    fn flatten_shapes() {
        let leaf = build_tree(&[bx(1, [0., 0., 1., 1.])]).unwrap().unwrap();
        let e = flatten_memory_subtree(&leaf);
        assert_eq!(e.len(), 1);
        assert!(e[0].1.lt.is_none() && e[0].1.gt.is_none());

        let three = build_tree(&[
            bx(0, [0., 0., 1., 1.]),
            bx(1, [2., 0., 3., 1.]),
            bx(2, [4., 0., 5., 1.]),
        ])
        .unwrap()
        .unwrap();
        let e = flatten_memory_subtree(&three);
        assert_eq!(e.len(), 3);
        assert_eq!(e[0].0, Name(1));
        assert_eq!(e[0].1.lt.unwrap().name, Name(0));
        assert_eq!(e[0].1.gt.unwrap().name, Name(2));
    }

    #[test]
    fn find_root_rejects_malformed() {
        let a = bx(0, [0., 0., 1., 1.]);
        let b = bx(1, [0., 0., 1., 1.]);
        let link = |n: u64, bb: &BBox| Some(ChildLink { name: Name(n), region: bb.region() });
        // two roots
        let two = vec![
            (Name(0), TreeEntry { bbox: a, lt: None, gt: None }),
            (Name(1), TreeEntry { bbox: b, lt: None, gt: None }),
        ];
        assert!(find_root(&two).is_err());
        // cycle
        let cyc = vec![
            (Name(0), TreeEntry { bbox: a, lt: link(1, &b), gt: None }),
            (Name(1), TreeEntry { bbox: b, lt: link(0, &a), gt: None }),
        ];
        assert!(find_root(&cyc).is_err());
        // dangling
        let dangling = vec![(Name(0), TreeEntry { bbox: a, lt: link(7, &b), gt: None })];
        assert!(find_root(&dangling).is_err());
    }
}
