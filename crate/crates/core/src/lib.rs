//! Neighborhood-aware star kernel (NASK) for graphs whose nodes and edges
//! carry mixed numerical and categorical attributes.
//!
//! The pipeline is: load a TU-format dataset ([`dataset`]), compare node and
//! edge attributes with an exponentiated Gower similarity ([`similarity`]),
//! compare star subgraphs and sum over all star pairs ([`star`]), grow the
//! stars hop by hop and sum over depths ([`expansion`]), assemble Gram
//! matrices in parallel ([`gram`]), and classify with a precomputed-kernel
//! SVM ([`svm`]) under repeated stratified cross-validation ([`eval`]).

pub mod dataset;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod gram;
pub mod graph;
pub mod similarity;
pub mod star;
pub mod svm;
pub mod synth;

pub use dataset::{compute_ranges, load_tu_dataset, validate_dataset, Dataset, DatasetReport};
pub use error::{Error, Result};
pub use eval::{cross_validate, stratified_folds, CvConfig, CvReport, Grid};
pub use expansion::{expand_star, expanded_family, nask_kernel, ExpansionPlan};
pub use gram::{
    check_psd, compute_gram, export_gram, import_gram, normalize_gram, GramMatrix, GramMeta,
    PsdVerdict,
};
pub use graph::{
    canonical_edge, AttributeSchema, AttributeValue, AttributeVector, AttributedGraph,
    DimensionKind, DimensionSpec, EdgeKey, ExpandedStar, NodeId,
};
pub use similarity::{element_similarity, exp_transform, partial_similarity, SimilarityParams};
pub use star::{
    decompose, enumerate_stars, extract_star, graph_kernel_ks, star_pair_kernel, Decomposition,
    EdgeElements, KernelContext,
};
pub use svm::{predict, train_binary, train_ovr, KernelBlock, SmoParams, SvmModel};

/// Version string stamped into Gram metadata and run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
