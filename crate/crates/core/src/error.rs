use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range for graph with {num_nodes} nodes")]
    InvalidNode { node: usize, num_nodes: usize },

    #[error("self-loop on node {0}")]
    SelfLoop(usize),

    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),

    #[error("graph invariant violated: {0}")]
    Invariant(String),

    #[error("missing dataset file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("{file}:{line}: invalid value {value}")]
    InvalidValue {
        file: String,
        line: usize,
        value: String,
    },

    #[error("edge ({u}, {v}) connects nodes of graphs {graph_u} and {graph_v}")]
    CrossGraphEdge {
        u: usize,
        v: usize,
        graph_u: usize,
        graph_v: usize,
    },

    #[error("mirrored rows for edge ({u}, {v}) disagree on attributes")]
    EdgeAttributeConflict { u: usize, v: usize },

    #[error("dataset has no graphs")]
    EmptyDataset,

    #[error("dataset validation failed: {}", .0.join("; "))]
    InvalidDataset(Vec<String>),

    #[error("numerical dimension `{0}` has no computed range")]
    UnconfiguredRange(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("similarity {0} outside [0, 1]")]
    Domain(f64),

    #[error("gamma must be positive and finite, got {0}")]
    InvalidGamma(f64),

    #[error("star belongs to graph {star} but graph {graph} was given")]
    GraphMismatch { star: usize, graph: usize },

    #[error("invalid Gram matrix: {0}")]
    InvalidGram(String),

    #[error("kernel entry ({i}, {j}) failed: {source}")]
    GramEntry {
        i: usize,
        j: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("eigensolver did not converge (matrix digest {0})")]
    EigenNonConvergence(String),

    #[error("unsupported Gram file version `{0}`")]
    GramVersion(String),

    #[error("Gram dimension mismatch: {0}")]
    GramDimension(String),

    #[error("Gram file line {line}: {message}")]
    GramParse { line: usize, message: String },

    #[error("Gram matrix was computed for dataset {found}, expected {expected}")]
    DigestMismatch { expected: String, found: String },

    #[error("kernel row has length {found}, model expects {expected}")]
    Alignment { expected: usize, found: usize },

    #[error("class {0} has no training examples")]
    DegenerateClass(usize),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("train and test indices overlap at {0}")]
    IndexOverlap(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
