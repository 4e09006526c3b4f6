//! Breadth-first intersection search of a tree graph by a dataset of queries.
//!
//! Every query starts at the root. Each pass joins the live queries to the
//! tree entries they are visiting, records box intersections, and forwards each
//! query to the children whose regions it overlaps. The search ends when no
//! query is left to forward.

use crate::dataset::{Dataset, PairDataset};
use crate::distributed::{DistributedTree, TreeDataset, TreeEntry};
use crate::error::{Error, Result};
use crate::geometry::{boxes_intersect, intersects_region, BBox, Name};

/// `(node to visit, (query name, query box))`
pub type QueryDataset = PairDataset<Name, (Name, BBox)>;

/// `(query name, tree node name)` for intersecting boxes.
pub type IntersectionDataset = PairDataset<Name, Name>;

/// Keys every query by the root so that the first pass visits it.
pub fn init_queries(search: &PairDataset<Name, BBox>, root: Option<Name>) -> Result<QueryDataset> {
    match root {
        Some(root) => Ok(search.map(move |(n, b)| (root, (*n, *b)))),
        None if search.is_empty() => Ok(search.engine().empty()),
        None => Err(Error::EmptyTree),
    }
}

/// One breadth-first pass: join, test boxes, and forward to children.
pub fn search_iteration(queries: &QueryDataset, tree: &TreeDataset) -> (IntersectionDataset, QueryDataset) {
    let visit: PairDataset<Name, ((Name, BBox), TreeEntry)> = queries.join(tree);
    let intersections = visit.flat_map(|(node, ((qn, qb), entry))| {
        (qn != node && boxes_intersect(qb, &entry.bbox)).then_some((*qn, *node))
    });
    let next = visit.flat_map(|(_, (query, entry))| {
        let query = *query;
        entry
            .children()
            .filter(move |c| intersects_region(&query.1, &c.region))
            .map(move |c| (c.name, query))
            .collect::<Vec<_>>()
    });
    (intersections, next)
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    /// `(query name, ascending intersecting node names)`; queries with no
    /// matches are absent.
    pub results: PairDataset<Name, Vec<Name>>,
    pub iterations: usize,
}

impl SearchOutcome {
    pub fn to_map(&self) -> std::collections::BTreeMap<Name, Vec<Name>> {
        self.results.collect().into_iter().collect()
    }
}

/// Runs passes until no query remains, then groups the accumulated
/// intersections by query.
pub fn run_search(search: &PairDataset<Name, BBox>, tree: &DistributedTree) -> Result<SearchOutcome> {
    let mut queries = init_queries(search, tree.root)?;
    let mut cumulative: Dataset<(Name, Name)> = search.engine().empty();
    let mut iterations = 0;
    while !queries.is_empty() {
        let (found, next) = search_iteration(&queries, &tree.entries);
        cumulative = cumulative.union(&found);
        queries = next;
        iterations += 1;
    }
    let results = cumulative.group_by_key().map_values(|names| {
        let mut names = names.clone();
        names.sort_unstable();
        names.dedup();
        names
    });
    Ok(SearchOutcome { results, iterations })
}

/// Convenience: a search dataset holding `boxes` keyed by name.
pub fn search_dataset(engine: &crate::dataset::Engine, boxes: &[BBox]) -> PairDataset<Name, BBox> {
    engine.parallelize(boxes.iter().map(|b| (b.name, *b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Engine, EngineConfig};
    use crate::distributed::{build_distributed_tree, ChildLink, FULL_DATASET_PATH};
    use crate::geometry::Region;

    fn engine() -> Engine {
        Engine::new(EngineConfig::new(2, 2)).unwrap()
    }

    fn bx(name: u64, c: [f64; 4]) -> BBox {
        BBox::new(name, c[0], c[1], c[2], c[3]).unwrap()
    }

    #[test]
    fn init_examples() {
        let e = engine();
        let one = search_dataset(&e, &[bx(3, [0., 0., 1., 1.])]);
        let q = init_queries(&one, Some(Name(7))).unwrap().collect();
        assert_eq!(q.len(), 1);
        assert_eq!(q[0].0, Name(7));
        assert!(init_queries(&search_dataset(&e, &[]), Some(Name(7))).unwrap().is_empty());
        let many = search_dataset(&e, &(0..5).map(|i| bx(i, [0., 0., 1., 1.])).collect::<Vec<_>>());
        let q = init_queries(&many, Some(Name(7))).unwrap().collect();
        assert_eq!(q.len(), 5);
        assert!(q.iter().all(|(k, _)| *k == Name(7)));
        assert!(matches!(init_queries(&one, None), Err(Error::EmptyTree)));
        assert!(init_queries(&search_dataset(&e, &[]), None).unwrap().is_empty());
    }

    #[test]
    fn disjoint_leaf_visit() {
        let e = engine();
        let leaf = bx(0, [0., 0., 1., 1.]);
        let tree = e.parallelize(vec![(Name(0), TreeEntry { bbox: leaf, lt: None, gt: None })]);
        let q = e.parallelize(vec![(Name(0), (Name(9), bx(9, [5., 5., 6., 6.])))]);
        let (found, next) = search_iteration(&q, &tree);
        assert!(found.is_empty() && next.is_empty());
    }

    #[test]
    fn self_visit_descends_both_sides() {
        let e = engine();
        let root = bx(1, [1., 1., 2., 2.]);
        let wide = Region::new(0., 0., 3., 3.);
        let entry = TreeEntry {
            bbox: root,
            lt: Some(ChildLink { name: Name(0), region: wide }),
            gt: Some(ChildLink { name: Name(2), region: wide }),
        };
        let tree = e.parallelize(vec![(Name(1), entry)]);
        let q = e.parallelize(vec![(Name(1), (Name(1), root))]);
        let (found, next) = search_iteration(&q, &tree);
        assert!(found.is_empty());
        let keys: Vec<Name> = next.keys().collect();
        assert_eq!(keys, vec![Name(0), Name(2)]);
    }

    #[test]
    fn single_box_only_self() {
        let e = engine();
        let b = [bx(0, [0., 0., 1., 1.])];
        let tree = build_distributed_tree(&e, &b, FULL_DATASET_PATH).unwrap();
        let out = run_search(&search_dataset(&e, &b), &tree).unwrap();
        assert!(out.results.is_empty());
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn identical_boxes_find_each_other() {
        let e = engine();
        let b = [bx(0, [0., 0., 1., 1.]), bx(1, [0., 0., 1., 1.])];
        let tree = build_distributed_tree(&e, &b, FULL_DATASET_PATH).unwrap();
        let out = run_search(&search_dataset(&e, &b), &tree).unwrap();
        assert_eq!(
            out.results.collect(),
            vec![(Name(0), vec![Name(1)]), (Name(1), vec![Name(0)])]
        );
    }
}
