//! Balanced k-d trees over axis-aligned bounding boxes.
//!
//! Trees are built by presorting the boxes and recursively partitioning the
//! presorted sequences around their medians. The same algorithm runs either on
//! in-memory arrays ([`memory`]) or on a small partitioned-dataset engine
//! ([`dataset`]), where the tree is stored as a keyed graph ([`distributed`])
//! and searched breadth-first with repeated joins ([`search`]).

pub mod bench;
pub mod dataset;
pub mod distributed;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod io;
pub mod memory;
pub mod search;

pub use dataset::{Dataset, Engine, EngineConfig, PairDataset};
pub use distributed::{
    build_distributed_tree, build_distributed_tree_auto, cutoff_depth, DistributedTree, TreeEntry,
    FULL_DATASET_PATH,
};
pub use error::{Error, Result};
pub use geometry::{boxes_intersect, intersects_region, merge_region, BBox, Name, Region, SortKey, SuperKey};
pub use memory::{build_memory_tree, build_tree, search_memory_tree, KdNode};
pub use search::{run_search, SearchOutcome};
