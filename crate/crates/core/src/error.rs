//! Crate-wide error type.

use thiserror::Error;

#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("labeling entry {index} is {value}, expected -1 or +1")]
    InvalidLabel { index: usize, value: i8 },

    #[error("edge ({k}, {l}) is invalid for {pixels} pixels")]
    InvalidEdge { k: usize, l: usize, pixels: usize },

    #[error("duplicate edge ({k}, {l})")]
    DuplicateEdge { k: usize, l: usize },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error(
        "pairwise weights violate the submodularity constraint \
         (w[-1,-1] + w[+1,+1] - 2 w[disagree] = {margin}, must be >= 0)"
    )]
    NonSubmodularWeights { margin: f64 },

    #[error("pairwise table of edge {edge_index} ({k}, {l}) is non-submodular (margin {margin})")]
    NonSubmodularTable {
        edge_index: usize,
        k: usize,
        l: usize,
        margin: f64,
    },

    #[error("invalid loss parameter: {0}")]
    InvalidLossParameter(String),

    #[error("ground truth has no positive labels; the square loss default scale is undefined")]
    DegenerateGroundTruth,

    #[error("loss capability {capability} is not supported by {operation}")]
    UnsupportedCapability {
        capability: &'static str,
        operation: &'static str,
    },

    #[error("problem size {size} exceeds the limit {limit} for {context}")]
    TooLarge {
        context: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("malformed raster header: {0}")]
    MalformedHeader(String),

    #[error("raster byte {index} is {value}, expected 0 or 255 for a label map")]
    NonBinaryLabel { index: usize, value: u8 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
