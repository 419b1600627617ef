//! Linear max-margin learning, the logistic baseline, model selection and metrics.

mod cv;
mod dataset;
mod logistic;
mod metrics;
mod model;
mod smo;
mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{
    default_c_grid, grid_search_cv, kfold, shuffle_split, stratified_folds, stratified_split,
    GridPoint, GridSearch, GridSearchResult, Learner,
};
pub use dataset::{Dataset, Scaler, Targets};
pub use logistic::{logistic_gradient, logistic_objective, sigmoid, train_logistic};
pub use metrics::{evaluate, ConfusionMatrix, Metrics};
pub use model::{LinearModel, ModelKind, Prediction, TrainingMetadata, MODEL_FORMAT_VERSION};
pub use svm::{epsilon_insensitive_objective, hinge_objective, train_svm, train_svr};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value in sample {0}")]
    NonFinite(usize),
    #[error("{0} feature rows but {1} targets")]
    LengthMismatch(usize, usize),
    #[error("label index {0} outside the class schema")]
    UnknownLabel(usize),
    #[error("training data contains a single class {0:?}")]
    SingleClass(String),
    #[error("empty dataset")]
    Empty,
    #[error("invalid hyperparameter: {0}")]
    BadHyperparameter(String),
    #[error("class {class:?} has {members} members, fewer than {k} folds")]
    ClassTooSmall { class: String, members: usize, k: usize },
    #[error("{n} samples cannot fill {k} folds")]
    TooFewSamples { n: usize, k: usize },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("unsupported: {0}")]
    Unsupported(&'static str),
    #[error("model format: {0}")]
    Format(String),
}

/// Iteration budget and stopping tolerance shared by all solvers.
///
/// For SMO an epoch is `n` pair updates and `tol` bounds the maximal KKT
/// violation; for Newton an epoch is one step and `tol` bounds the gradient
/// infinity norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub seed: u64,
    pub max_epochs: usize,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            seed: 0,
            max_epochs: 200,
            tol: 1e-4,
        }
    }
}
