use alloc::vec;
use alloc::vec::Vec;

use super::model::{adapter_backward, adapter_trace, forward_backward, forward_trace};
use super::params::{AdapterParams, ForecasterParams, ParamTensors};
use super::{ForecastConfig, ForecastError};

/// One training window. `z` is the raw node embedding when an adapter is in
/// use, otherwise the conditioning vector itself (empty for the plain model).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub window: Vec<f64>,
    pub target: Vec<f64>,
    pub z: Option<Vec<f64>>,
}

pub(crate) struct BatchGrads {
    pub loss: f64,
    pub params: ForecasterParams,
    pub adapter: Option<AdapterParams>,
    /// Gradient w.r.t. each sample's conditioning vector.
    pub dz_prime: Vec<Vec<f64>>,
}

fn check_sample(p: &ForecasterParams, adapter: Option<&AdapterParams>, s: &Sample) -> Result<(), ForecastError> {
    let mismatch = |what, expected, got| Err(ForecastError::DimMismatch { what, expected, got });
    if s.window.len() != p.history {
        return mismatch("window", p.history, s.window.len());
    }
    if s.target.len() != p.horizon {
        return mismatch("target", p.horizon, s.target.len());
    }
    let z_len = s.z.as_ref().map_or(0, Vec::len);
    match adapter {
        Some(a) => {
            if a.d_s != p.d_s {
                return mismatch("adapter output", p.d_s, a.d_s);
            }
            if z_len != a.input_dim {
                return mismatch("embedding", a.input_dim, z_len);
            }
        }
        None if z_len != p.d_s => return mismatch("conditioning vector", p.d_s, z_len),
        None => {}
    }
    Ok(())
}

pub(crate) fn batch_grads(
    p: &ForecasterParams,
    adapter: Option<&AdapterParams>,
    batch: &[Sample],
    config: &ForecastConfig,
    loss_scale: f64,
) -> Result<BatchGrads, ForecastError> {
    let slope = config.leaky_slope;
    let mut gp = p.zeros_like();
    let mut ga = adapter.map(AdapterParams::zeros_like);
    let mut dz_all = Vec::with_capacity(batch.len());
    let denom = (batch.len() * p.horizon) as f64;
    let mut loss = 0.0;
    for s in batch {
        check_sample(p, adapter, s)?;
        let z: &[f64] = s.z.as_deref().unwrap_or(&[]);
        let a_trace = adapter.map(|a| adapter_trace(z, a, slope));
        let z_prime: &[f64] = match &a_trace {
            Some(t) => &t.out,
            None => z,
        };
        let trace = forward_trace(p, &s.window, z_prime, slope, config.epsilon_revin);
        let mut dy = vec![0.0; p.horizon];
        for (k, (yh, y)) in trace.output.iter().zip(&s.target).enumerate() {
            let e = yh - y;
            loss += e * e;
            dy[k] = loss_scale * 2.0 * e / denom;
        }
        let dzp = forward_backward(p, &trace, &dy, slope, &mut gp);
        if let (Some(a), Some(t), Some(g)) = (adapter, &a_trace, ga.as_mut()) {
            adapter_backward(z, a, t, &dzp, slope, g);
        }
        dz_all.push(dzp);
    }
    Ok(BatchGrads { loss: loss_scale * loss / denom, params: gp, adapter: ga, dz_prime: dz_all })
}

/// Scaled mean squared error over a batch and its analytic gradients.
pub fn loss_and_grads(
    params: &ForecasterParams,
    adapter: Option<&AdapterParams>,
    batch: &[Sample],
    config: &ForecastConfig,
    loss_scale: f64,
) -> Result<(f64, ForecasterParams, Option<AdapterParams>), ForecastError> {
    let g = batch_grads(params, adapter, batch, config, loss_scale)?;
    Ok((g.loss, g.params, g.adapter))
}

fn loss_only(p: &ForecasterParams, a: Option<&AdapterParams>, batch: &[Sample], config: &ForecastConfig) -> f64 {
    batch_grads(p, a, batch, config, 1.0).map(|g| g.loss).unwrap_or(f64::NAN)
}

/// Largest relative disagreement between the analytic gradient and central
/// finite differences with step 1e-4, over every forecaster and adapter
/// parameter.
pub fn grad_check(
    params: &ForecasterParams,
    adapter: Option<&AdapterParams>,
    batch: &[Sample],
    config: &ForecastConfig,
) -> Result<f64, ForecastError> {
    const H: f64 = 1e-4;
    let (_, gp, ga) = loss_and_grads(params, adapter, batch, config, 1.0)?;
    let rel = |a: f64, f: f64| (a - f).abs() / 1f64.max(a.abs()).max(f.abs());
    let mut worst = 0.0f64;

    let mut p = params.clone();
    let analytic: Vec<Vec<f64>> = gp.tensors().iter().map(|t| t.to_vec()).collect();
    for (k, ga_t) in analytic.iter().enumerate() {
        for i in 0..ga_t.len() {
            let orig = p.tensors()[k][i];
            p.tensors_mut()[k][i] = orig + H;
            let up = loss_only(&p, adapter, batch, config);
            p.tensors_mut()[k][i] = orig - H;
            let down = loss_only(&p, adapter, batch, config);
            p.tensors_mut()[k][i] = orig;
            worst = worst.max(rel(ga_t[i], (up - down) / (2.0 * H)));
        }
    }

    if let (Some(a0), Some(ga)) = (adapter, ga) {
        let mut a = a0.clone();
        let analytic: Vec<Vec<f64>> = ga.tensors().iter().map(|t| t.to_vec()).collect();
        for (k, ga_t) in analytic.iter().enumerate() {
            for i in 0..ga_t.len() {
                let orig = a.tensors()[k][i];
                a.tensors_mut()[k][i] = orig + H;
                let up = loss_only(params, Some(&a), batch, config);
                a.tensors_mut()[k][i] = orig - H;
                let down = loss_only(params, Some(&a), batch, config);
                a.tensors_mut()[k][i] = orig;
                worst = worst.max(rel(ga_t[i], (up - down) / (2.0 * H)));
            }
        }
    }
    Ok(worst)
}
