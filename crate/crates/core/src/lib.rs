//! Graph classification on structural-entropy encoding trees.
//!
//! Graphs are parsed from TUDataset files ([`tudataset`]), turned into
//! bounded-height encoding trees of low structural entropy ([`optimizer`]),
//! summarised by label histograms propagated from the leaves to the root
//! ([`kernel`]), and classified with a kernel SVM under stratified
//! cross-validation ([`svm`], [`cv`]).
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod cv;
pub mod error;
pub mod graph;
pub mod kernel;
pub mod optimizer;
pub mod oracle;
pub mod pipeline;
pub mod scalar;
pub mod svm;
pub mod tree;
pub mod tudataset;

pub use error::{Error, Result};
pub use graph::{assign_initial_labels, Dataset, Edge, Graph, InitialLabeling, LabelMode};
pub use kernel::{
    gram_matrix, hierarchical_reporting, kernel_value, rbf_on_features, FeatureVector,
    GammaPolicy, KernelMatrix, KernelMode, LabelDictionary,
};
pub use optimizer::{
    compress_phase, merge_phase, optimize, optimize_disconnected, optimize_encoding_tree,
    pad_to_height, OptimizerConfig, OptimizerStats,
};
pub use scalar::Scalar;
pub use svm::{predict, smo_train, SvmModel};
pub use tree::{one_level_tree, recompute_caches, structural_entropy, EncodingTree};
pub use tudataset::{parse_tudataset, write_tudataset};

pub type Graph64 = Graph<f64>;
pub type Dataset64 = Dataset<f64>;
pub type EncodingTree64 = EncodingTree<f64>;
pub type KernelMatrix64 = KernelMatrix<f64>;
pub type SvmModel64 = SvmModel<f64>;
pub type Graph32 = Graph<f32>;
pub type EncodingTree32 = EncodingTree<f32>;
