mod common;

use std::collections::BTreeSet;

use common::{engine, oracle, random_boxes};
use kdmr::bench::{generate_test_data, SquareGridSpec};
use kdmr::search::{init_queries, run_search, search_dataset, search_iteration};
use kdmr::{build_distributed_tree, intersects_region, Name, FULL_DATASET_PATH};

#[test]
fn first_pass_descends_by_region_test() {
    let boxes = random_boxes(64, 61);
    let e = engine(2, 4);
    let tree = build_distributed_tree(&e, &boxes, FULL_DATASET_PATH).unwrap();
    let root_entry = tree
        .entries
        .collect()
        .into_iter()
        .find(|(n, _)| Some(*n) == tree.root)
        .unwrap()
        .1;
    for q in &boxes {
        let queries = init_queries(&search_dataset(&e, &[*q]), tree.root).unwrap();
        let (_, next) = search_iteration(&queries, &tree.entries);
        let got: BTreeSet<Name> = next.keys().collect().into_iter().collect();
        let expect: BTreeSet<Name> = root_entry
            .children()
            .filter(|c| intersects_region(q, &c.region))
            .map(|c| c.name)
            .collect();
        assert_eq!(got, expect);
    }
}

#[test]
fn complete_and_sound_on_random_instances() {
    for (n, seed) in [(1usize, 1u64), (3, 2), (50, 3), (257, 4), (1024, 5)] {
        let boxes = random_boxes(n, seed);
        let e = engine(3, 5);
        let tree = build_distributed_tree(&e, &boxes, 2).unwrap();
        let out = run_search(&search_dataset(&e, &boxes), &tree).unwrap();
        assert_eq!(out.to_map(), oracle(&boxes, &boxes), "n={n}");
        assert!(out.iterations <= tree.depth() + 1);
    }
}

#[test]
fn queries_need_not_be_tree_boxes() {
    let tree_boxes = random_boxes(200, 71);
    let queries: Vec<_> = random_boxes(80, 72)
        .into_iter()
        .map(|mut b| {
            b.name = Name(b.name.0 + 1_000_000);
            b
        })
        .collect();
    let e = engine(2, 3);
    let tree = build_distributed_tree(&e, &tree_boxes, 3).unwrap();
    let out = run_search(&search_dataset(&e, &queries), &tree).unwrap();
    assert_eq!(out.to_map(), oracle(&queries, &tree_boxes));
}

#[test]
fn one_square_has_nine_matches() {
    let boxes = generate_test_data(&SquareGridSpec::new(1)).unwrap();
    let e = engine(2, 2);
    let tree = build_distributed_tree(&e, &boxes, FULL_DATASET_PATH).unwrap();
    let out = run_search(&search_dataset(&e, &boxes), &tree).unwrap();
    let map = out.to_map();
    assert_eq!(map.len(), 9);
    assert_eq!(map, oracle(&boxes, &boxes));
}

#[test]
fn results_independent_of_workers() {
    let boxes = random_boxes(500, 73);
    let base = {
        let e = engine(1, 4);
        let tree = build_distributed_tree(&e, &boxes, 1).unwrap();
        run_search(&search_dataset(&e, &boxes), &tree).unwrap().results.collect()
    };
    for w in [2, 4, 8] {
        let e = engine(w, 4);
        let tree = build_distributed_tree(&e, &boxes, 1).unwrap();
        assert_eq!(run_search(&search_dataset(&e, &boxes), &tree).unwrap().results.collect(), base);
    }
}
