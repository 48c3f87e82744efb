//! Latent-graph classification of volumetric scans.
//!
//! Each subject is a stack of 64 slice embeddings (1152 values per slice).
//! The stack becomes a 64-node graph, either from slice ordering or from
//! k-nearest neighbors in feature space, and a two-layer GraphSAGE or GAT
//! head classifies it after global mean pooling. A slice-conditioned MLP
//! serves as the non-graph baseline.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the width used by the training pipeline.

pub mod data_io;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod metrics;
pub mod models;
pub mod numerics;
mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use graph::{
    build_knn_topology, build_slice_topology, pairwise_distance, validate_graph, EdgeSet, Metric,
    SliceTopology, SubjectGraph, TopologySpec, Violation, FEATURE_DIM, NUM_SLICES,
};
pub use metrics::{accuracy, binary_auroc, macro_auroc, EvalBatch};
pub use models::{count_parameters, Arch, Checkpoint, GraphLevelOutput, Model, ModelConfig};
pub use numerics::{LrSchedule, Matrix, ParamTensor};
pub use scalar::Scalar;
pub use training::{repeat_runs, train, RunResult, RunSummary, Splits, TrainConfig};

/// Double-precision matrix, the width used for training.
pub type Matrix64 = numerics::Matrix<f64>;
pub type Matrix32 = numerics::Matrix<f32>;
pub type Model64 = models::Model<f64>;
pub type Model32 = models::Model<f32>;
pub type SubjectGraph64 = graph::SubjectGraph<f64>;
pub type Splits64 = training::Splits<f64>;
pub type Checkpoint64 = models::Checkpoint<f64>;
