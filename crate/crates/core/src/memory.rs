//! Memory-resident k-d tree built from two presorted arrays.
//!
//! The split-axis array is partitioned trivially at its median; the other
//! array is swept once and partitioned by the median's super key, which keeps
//! both child arrays in presorted order without re-sorting.

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{ensure_unique_names, intersects_region, merge_region, BBox, Name, Region, SortKey, SuperKey};

#[derive(Clone, Debug, PartialEq)]
pub struct KdNode {
    pub bbox: BBox,
    pub less: Option<Box<KdNode>>,
    pub greater: Option<Box<KdNode>>,
    pub region: Region,
}

impl KdNode {
    /// Number of levels, counting this node as level one.
    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .map(KdNode::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        1 + self.children().map(KdNode::len).sum::<usize>()
    }

    pub fn children(&self) -> impl Iterator<Item = &KdNode> {
        self.less.as_deref().into_iter().chain(self.greater.as_deref())
    }

    /// Pre-order traversal.
    pub fn iter(&self) -> impl Iterator<Item = &KdNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            if let Some(g) = node.greater.as_deref() {
                stack.push(g);
            }
            if let Some(l) = node.less.as_deref() {
                stack.push(l);
            }
            Some(node)
        })
    }
}

/// Comparison counts gathered during a build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BuildStats {
    pub presort_comparisons: u64,
    pub partition_comparisons: u64,
}

impl BuildStats {
    pub fn total(&self) -> u64 {
        self.presort_comparisons + self.partition_comparisons
    }
}

/// Sorts copies of `boxes` by the x_min and y_min super keys.
pub fn presort(boxes: &[BBox]) -> Result<(Vec<BBox>, Vec<BBox>)> {
    let mut count = 0;
    presort_counted(boxes, &mut count)
}

fn presort_counted(boxes: &[BBox], comparisons: &mut u64) -> Result<(Vec<BBox>, Vec<BBox>)> {
    ensure_unique_names(boxes)?;
    let mut sort = |key: SortKey| {
        let mut v = boxes.to_vec();
        v.sort_by(|a, b| {
            *comparisons += 1;
            a.key(key).cmp(&b.key(key))
        });
        v
    };
    let xs = sort(SortKey::XMin);
    let ys = sort(SortKey::YMin);
    Ok((xs, ys))
}

/// Stable single-pass split of `arr` around `pivot`, compared in `pivot_key`.
///
/// The element whose super key equals the pivot is dropped.
pub fn sweep_and_partition(arr: &[BBox], pivot: SuperKey, pivot_key: SortKey) -> (Vec<BBox>, Vec<BBox>) {
    let mut count = 0;
    sweep_counted(arr, pivot, pivot_key, &mut count)
}

fn sweep_counted(
    arr: &[BBox],
    pivot: SuperKey,
    pivot_key: SortKey,
    comparisons: &mut u64,
) -> (Vec<BBox>, Vec<BBox>) {
    let half = arr.len() / 2 + 1;
    let mut less = Vec::with_capacity(half);
    let mut greater = Vec::with_capacity(half);
    for b in arr {
        *comparisons += 1;
        match b.key(pivot_key).cmp(&pivot) {
            std::cmp::Ordering::Less => less.push(*b),
            std::cmp::Ordering::Greater => greater.push(*b),
            std::cmp::Ordering::Equal => {}
        }
    }
    (less, greater)
}

/// Builds the subtree rooted at `depth` from x_min- and y_min-sorted copies of
/// the same boxes. Returns `None` for empty input.
pub fn build_memory_tree(x_sorted: &[BBox], y_sorted: &[BBox], depth: usize) -> Option<Box<KdNode>> {
    let mut count = 0;
    build_from_sorted(x_sorted, y_sorted, depth, &mut count)
}

/// As [`build_memory_tree`], but the two child builds of every node shallower
/// than `parallel_depth` run as parallel tasks on the current rayon pool.
/// Produces the same tree as the sequential build.
pub fn build_memory_tree_parallel(
    x_sorted: &[BBox],
    y_sorted: &[BBox],
    depth: usize,
    parallel_depth: usize,
) -> Option<Box<KdNode>> {
    let (split, other) = order_for_depth(x_sorted, y_sorted, depth);
    build_par(split, other, depth, parallel_depth)
}

/// Presorts and builds a whole tree, also reporting comparison counts.
pub fn build_with_stats(boxes: &[BBox]) -> Result<(Option<Box<KdNode>>, BuildStats)> {
    let mut stats = BuildStats::default();
    let (xs, ys) = presort_counted(boxes, &mut stats.presort_comparisons)?;
    let root = build_from_sorted(&xs, &ys, 0, &mut stats.partition_comparisons);
    Ok((root, stats))
}

/// Presorts and builds a whole tree.
pub fn build_tree(boxes: &[BBox]) -> Result<Option<Box<KdNode>>> {
    build_with_stats(boxes).map(|(root, _)| root)
}

fn order_for_depth<'a>(x_sorted: &'a [BBox], y_sorted: &'a [BBox], depth: usize) -> (&'a [BBox], &'a [BBox]) {
    debug_assert_eq!(x_sorted.len(), y_sorted.len());
    match SortKey::split_axis(depth) {
        SortKey::XMin => (x_sorted, y_sorted),
        _ => (y_sorted, x_sorted),
    }
}

fn build_from_sorted(x_sorted: &[BBox], y_sorted: &[BBox], depth: usize, comparisons: &mut u64) -> Option<Box<KdNode>> {
    let (split, other) = order_for_depth(x_sorted, y_sorted, depth);
    build_rec(split, other, depth, comparisons)
}

// `split` is sorted by this level's axis, `other` by the next level's axis.
fn build_rec(split: &[BBox], other: &[BBox], depth: usize, comparisons: &mut u64) -> Option<Box<KdNode>> {
    if split.is_empty() {
        return None;
    }
    let axis = SortKey::split_axis(depth);
    let mid = split.len() / 2;
    let median = split[mid];
    let (lo_other, hi_other) = sweep_counted(other, median.key(axis), axis, comparisons);
    let less = build_rec(&lo_other, &split[..mid], depth + 1, comparisons);
    let greater = build_rec(&hi_other, &split[mid + 1..], depth + 1, comparisons);
    Some(make_node(median, less, greater))
}

fn build_par(split: &[BBox], other: &[BBox], depth: usize, parallel_depth: usize) -> Option<Box<KdNode>> {
    if depth >= parallel_depth {
        let mut count = 0;
        return build_rec(split, other, depth, &mut count);
    }
    if split.is_empty() {
        return None;
    }
    let axis = SortKey::split_axis(depth);
    let mid = split.len() / 2;
    let median = split[mid];
    let (lo_other, hi_other) = sweep_and_partition(other, median.key(axis), axis);
    let (less, greater) = rayon::join(
        || build_par(&lo_other, &split[..mid], depth + 1, parallel_depth),
        || build_par(&hi_other, &split[mid + 1..], depth + 1, parallel_depth),
    );
    Some(make_node(median, less, greater))
}

fn make_node(bbox: BBox, less: Option<Box<KdNode>>, greater: Option<Box<KdNode>>) -> Box<KdNode> {
    let region = merge_region(
        &bbox,
        less.iter().chain(greater.iter()).map(|c| &c.region),
    );
    Box::new(KdNode {
        bbox,
        less,
        greater,
        region,
    })
}

/// Names of all tree boxes intersecting `query`, excluding the query's own
/// name, in ascending order.
pub fn search_memory_tree(root: &KdNode, query: &BBox) -> Vec<Name> {
    let mut out = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.bbox.name != query.name && crate::geometry::boxes_intersect(query, &node.bbox) {
            out.push(node.bbox.name);
        }
        for child in node.children() {
            if intersects_region(query, &child.region) {
                stack.push(child);
            }
        }
    }
    out.sort_unstable();
    out
}
