//! Reference channel-independent MLP forecaster with optional geolocation
//! conditioning.
//!
//! Every node's window goes through the same network:
//!
//! ```text
//! n, mu, sigma = revin(window)
//! s   = E n + e                       (temporal embedding, width d_t)
//! s'  = concat(s, z')                 (z' from the adapter or a node table)
//! h   = leaky_relu(C s' + c)
//! out = (D h + d) * sigma + mu
//! ```
//!
//! with `z' = W2 leaky_relu(W1 z + b1) + b2` for a node embedding `z`.
//! Gradients are written out by hand and checked against central finite
//! differences in [`grad_check`].

mod adam;
mod gradcheck;
mod model;
mod params;
mod revin;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use alloc::string::String;

pub use adam::Adam;
pub use gradcheck::{grad_check, loss_and_grads, Sample};
pub use model::{adapter_forward, forecaster_forward, leaky_relu};
pub use params::{AdapterParams, ForecasterParams, NodeEmbeddingTable, ParamTensors};
pub use revin::{revin_denormalize, revin_normalize};
pub use train::{
    evaluate_forecaster, evaluate_node_table, split_for, train_forecaster, train_with_node_table, zero_shot_eval,
    EpochLoss, ForecastMetrics, TrainedForecaster, TrainedNodeTable,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error("expected length {expected}, got {got} ({what})")]
    DimMismatch { what: &'static str, expected: usize, got: usize },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Series(#[from] crate::series::SeriesError),
    #[error("split has {len} steps, a window needs {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("ids do not line up: {0}")]
    Misalignment(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch} (last finite loss {last_finite})")]
    NonFiniteLoss { epoch: usize, batch: usize, last_finite: f64 },
    #[error("model was trained without a geolocation adapter")]
    NoAdapter,
}

/// Shapes and optimization settings of the forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Input window length H.
    pub history: usize,
    /// Forecast horizon F.
    pub horizon: usize,
    /// Temporal embedding width d_t.
    pub d_t: usize,
    /// Conditioning width d_s (adapter output / node-table rows).
    pub d_s: usize,
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub leaky_slope: f64,
    pub epsilon_revin: f64,
    /// Shrink d_t by d_s when conditioning so the encoder width is unchanged.
    pub preserve_width: bool,
    pub split: (f64, f64, f64),
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            history: 24,
            horizon: 12,
            d_t: 32,
            d_s: 32,
            hidden: 64,
            lr: 1e-3,
            epochs: 50,
            batch: 64,
            seed: 0,
            leaky_slope: 0.01,
            epsilon_revin: 1e-5,
            preserve_width: false,
            split: crate::series::DEFAULT_SPLIT,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: &str| Err(ForecastError::BadConfig(String::from(m)));
        if self.history == 0 || self.horizon == 0 || self.d_t == 0 || self.hidden == 0 || self.batch == 0 {
            return bad("history, horizon, d_t, hidden and batch must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be positive");
        }
        if !(self.epsilon_revin.is_finite() && self.epsilon_revin > 0.0) {
            return bad("epsilon_revin must be positive");
        }
        if !self.leaky_slope.is_finite() {
            return bad("leaky_slope must be finite");
        }
        if self.preserve_width && self.d_s >= self.d_t {
            return bad("preserve_width needs d_t > d_s");
        }
        Ok(())
    }

    /// Temporal embedding width actually used.
    pub fn temporal_width(&self, conditioned: bool) -> usize {
        if conditioned && self.preserve_width {
            self.d_t - self.d_s
        } else {
            self.d_t
        }
    }

    pub fn window(&self) -> usize {
        self.history + self.horizon
    }
}
