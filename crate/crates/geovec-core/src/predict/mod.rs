//! Geographic prediction: linear probes from embeddings to per-node
//! attributes.

mod cv;
mod metrics;
mod ridge;
mod standardize;

use alloc::string::String;
use thiserror::Error;

pub use cv::{
    concat_representations, fold_assignment, holdout_eval, kfold_cv, AttributeVector, CvReport, FoldMetrics,
    HoldoutSplit,
};
pub use metrics::{metrics, Metrics};
pub use ridge::{ridge_fit, ridge_objective, ridge_predict, RidgeModel, DEFAULT_ALPHA};
pub use standardize::{standardize_fit, Standardizer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PredictError {
    #[error("expected {expected} features, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("target is constant; R\u{b2} is undefined")]
    DegenerateTarget,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("fold count {folds} invalid for {n} samples")]
    InvalidFolds { folds: usize, n: usize },
    #[error("alpha must be finite and non-negative")]
    BadAlpha,
    #[error("non-finite value in input")]
    NonFinite,
    #[error("ids do not line up: {0}")]
    Misalignment(String),
    #[error("train and test share id `{0}`")]
    OverlapDetected(String),
    #[error("representations cover different nodes")]
    NodeMismatch,
}
