use std::path::PathBuf;

use crate::geometry::Name;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("box {name}: {reason}")]
    InvalidBox { name: Name, reason: &'static str },

    #[error("duplicate box name {0}")]
    DuplicateName(Name),

    #[error("partition count must be at least 1")]
    InvalidPartitions,

    #[error("worker count must be at least 1")]
    InvalidWorkers,

    #[error("index {index} out of range for dataset of {len} elements")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("operation requires a non-empty dataset")]
    EmptyDataset,

    #[error("queries supplied for an empty tree")]
    EmptyTree,

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("invalid cutoff parameters: {0}")]
    InvalidCutoff(&'static str),

    #[error("square count must be at least 1")]
    InvalidSquareCount,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fit failed: {0}")]
    Fit(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("failed to start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}
