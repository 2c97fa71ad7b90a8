use libm::sqrt;
use serde::{Deserialize, Serialize};

use super::PredictError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

/// MAE, RMSE and R² (about the mean of `y_true`, may be negative).
pub fn metrics(y_true: &[f64], y_pred: &[f64]) -> Result<Metrics, PredictError> {
    let q = y_true.len();
    if y_pred.len() != q {
        return Err(PredictError::LengthMismatch { rows: q, targets: y_pred.len() });
    }
    if q < 2 {
        return Err(PredictError::TooFewSamples { needed: 2, got: q });
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(PredictError::NonFinite);
    }
    let n = q as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let sst: f64 = y_true.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(PredictError::DegenerateTarget);
    }
    let (mut sae, mut sse) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        sae += e.abs();
        sse += e * e;
    }
    Ok(Metrics {
        mae: sae / n,
        rmse: sqrt(sse / n),
        r2: 1.0 - sse / sst,
    })
}
