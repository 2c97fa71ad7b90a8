use alloc::vec;
use alloc::vec::Vec;

use super::params::{AdapterParams, ForecasterParams};
use super::revin::revin_normalize;
use super::{ForecastConfig, ForecastError};

#[inline]
pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

#[inline]
fn leaky_grad(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        slope
    }
}

/// `out = W x + b` for row-major `W` of shape `out.len() x x.len()`.
#[inline]
fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        let mut acc = b[i];
        for (wv, xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        *o = acc;
    }
}

/// Accumulates `dW += dy xᵀ`, `db += dy` and returns `Wᵀ dy` when asked.
#[inline]
fn affine_backward(w: &[f64], x: &[f64], dy: &[f64], dw: &mut [f64], db: &mut [f64], dx: Option<&mut [f64]>) {
    let cols = x.len();
    for (i, &g) in dy.iter().enumerate() {
        db[i] += g;
        if g == 0.0 {
            continue;
        }
        for (d, xv) in dw[i * cols..(i + 1) * cols].iter_mut().zip(x) {
            *d += g * xv;
        }
    }
    if let Some(dx) = dx {
        for (j, d) in dx.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, &g) in dy.iter().enumerate() {
                acc += w[i * cols + j] * g;
            }
            *d = acc;
        }
    }
}

/// Intermediate values of one adapter pass.
#[derive(Debug, Clone)]
pub(crate) struct AdapterTrace {
    pub pre: Vec<f64>,
    pub act: Vec<f64>,
    pub out: Vec<f64>,
}

pub(crate) fn adapter_trace(z: &[f64], p: &AdapterParams, slope: f64) -> AdapterTrace {
    let mut pre = vec![0.0; p.d_s];
    affine(&p.w1, &p.b1, z, &mut pre);
    let act: Vec<f64> = pre.iter().map(|&v| leaky_relu(v, slope)).collect();
    let mut out = vec![0.0; p.d_s];
    affine(&p.w2, &p.b2, &act, &mut out);
    AdapterTrace { pre, act, out }
}

/// `W2 leaky_relu(W1 z + b1) + b2`.
pub fn adapter_forward(z: &[f64], params: &AdapterParams, slope: f64) -> Result<Vec<f64>, ForecastError> {
    if z.len() != params.input_dim {
        return Err(ForecastError::DimMismatch {
            what: "adapter input",
            expected: params.input_dim,
            got: z.len(),
        });
    }
    Ok(adapter_trace(z, params, slope).out)
}

/// Backpropagates `dout` through the adapter, accumulating into `grads`.
pub(crate) fn adapter_backward(
    z: &[f64],
    p: &AdapterParams,
    trace: &AdapterTrace,
    dout: &[f64],
    slope: f64,
    grads: &mut AdapterParams,
) {
    let mut dact = vec![0.0; p.d_s];
    affine_backward(&p.w2, &trace.act, dout, &mut grads.w2, &mut grads.b2, Some(&mut dact));
    let dpre: Vec<f64> = dact
        .iter()
        .zip(&trace.pre)
        .map(|(g, &x)| g * leaky_grad(x, slope))
        .collect();
    affine_backward(&p.w1, z, &dpre, &mut grads.w1, &mut grads.b1, None);
}

/// Intermediate values of one forecaster pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    pub normalized: Vec<f64>,
    pub sigma: f64,
    pub concat: Vec<f64>,
    pub pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

pub(crate) fn forward_trace(
    p: &ForecasterParams,
    window: &[f64],
    z_prime: &[f64],
    slope: f64,
    epsilon: f64,
) -> ForwardTrace {
    let (normalized, mu, sigma) = revin_normalize(window, epsilon);
    let mut concat = vec![0.0; p.width()];
    affine(&p.embed_w, &p.embed_b, &normalized, &mut concat[..p.d_t]);
    concat[p.d_t..].copy_from_slice(z_prime);
    let mut pre = vec![0.0; p.hidden];
    affine(&p.enc_w, &p.enc_b, &concat, &mut pre);
    let hidden: Vec<f64> = pre.iter().map(|&v| leaky_relu(v, slope)).collect();
    let mut output = vec![0.0; p.horizon];
    affine(&p.dec_w, &p.dec_b, &hidden, &mut output);
    output.iter_mut().for_each(|o| *o = *o * sigma + mu);
    ForwardTrace { normalized, sigma, concat, pre, hidden, output }
}

/// Backpropagates `dy` (gradient w.r.t. denormalized outputs) and returns the
/// gradient w.r.t. `z_prime`.
pub(crate) fn forward_backward(
    p: &ForecasterParams,
    trace: &ForwardTrace,
    dy: &[f64],
    slope: f64,
    grads: &mut ForecasterParams,
) -> Vec<f64> {
    let dout: Vec<f64> = dy.iter().map(|g| g * trace.sigma).collect();
    let mut dh = vec![0.0; p.hidden];
    affine_backward(&p.dec_w, &trace.hidden, &dout, &mut grads.dec_w, &mut grads.dec_b, Some(&mut dh));
    let dpre: Vec<f64> = dh.iter().zip(&trace.pre).map(|(g, &x)| g * leaky_grad(x, slope)).collect();
    let mut dconcat = vec![0.0; p.width()];
    affine_backward(&p.enc_w, &trace.concat, &dpre, &mut grads.enc_w, &mut grads.enc_b, Some(&mut dconcat));
    affine_backward(
        &p.embed_w,
        &trace.normalized,
        &dconcat[..p.d_t],
        &mut grads.embed_w,
        &mut grads.embed_b,
        None,
    );
    dconcat[p.d_t..].to_vec()
}

/// One window through RevIN, embedder, concatenation, encoder and predictor;
/// returns `horizon` values in the window's original units.
pub fn forecaster_forward(
    window: &[f64],
    z_prime: &[f64],
    params: &ForecasterParams,
    config: &ForecastConfig,
) -> Result<Vec<f64>, ForecastError> {
    if window.len() != params.history {
        return Err(ForecastError::DimMismatch {
            what: "window",
            expected: params.history,
            got: window.len(),
        });
    }
    if z_prime.len() != params.d_s {
        return Err(ForecastError::DimMismatch {
            what: "conditioning vector",
            expected: params.d_s,
            got: z_prime.len(),
        });
    }
    Ok(forward_trace(params, window, z_prime, config.leaky_slope, config.epsilon_revin).output)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::revin::revin_denormalize;
    use crate::hash::splitmix64;

    fn unif(s: &mut u64) -> f64 {
        (splitmix64(s) >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn fill(v: &mut [f64], s: &mut u64) {
        v.iter_mut().for_each(|x| *x = unif(s));
    }

    // Straight-line scalar oracles, no shared helpers with the model code.
    fn oracle_matvec(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut out = Vec::new();
        for i in 0..b.len() {
            let mut acc = 0.0;
            for j in 0..x.len() {
                acc += w[i * x.len() + j] * x[j];
            }
            out.push(acc + b[i]);
        }
        out
    }

    fn oracle_lrelu(v: Vec<f64>, slope: f64) -> Vec<f64> {
        v.into_iter().map(|x| if x > 0.0 { x } else { x * slope }).collect()
    }

    #[test]
    fn zero_adapter_is_zero() {
        let p = AdapterParams::zeros(5, 3);
        assert_eq!(adapter_forward(&[1.0, -2.0, 3.0, 0.5, 9.0], &p, 0.01).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn identity_adapter_on_nonnegative_input() {
        let mut p = AdapterParams::zeros(3, 3);
        for i in 0..3 {
            p.w1[i * 3 + i] = 1.0;
            p.w2[i * 3 + i] = 1.0;
        }
        let z = [0.0, 2.5, 7.0];
        assert_eq!(adapter_forward(&z, &p, 0.01).unwrap(), z.to_vec());
        assert!(adapter_forward(&[1.0], &p, 0.01).is_err());
    }

    #[test]
    fn adapter_matches_oracle() {
        let mut s = 3u64;
        let mut p = AdapterParams::zeros(7, 4);
        fill(&mut p.w1, &mut s);
        fill(&mut p.b1, &mut s);
        fill(&mut p.w2, &mut s);
        fill(&mut p.b2, &mut s);
        let mut z = vec![0.0; 7];
        fill(&mut z, &mut s);
        let expect = oracle_matvec(&p.w2, &p.b2, &oracle_lrelu(oracle_matvec(&p.w1, &p.b1, &z), 0.2));
        let got = adapter_forward(&z, &p, 0.2).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_params_predict_window_mean() {
        let cfg = ForecastConfig { history: 4, horizon: 3, d_t: 2, d_s: 1, hidden: 5, ..Default::default() };
        let p = ForecasterParams::zeros(4, 3, 2, 1, 5);
        let out = forecaster_forward(&[1.0, 2.0, 3.0, 6.0], &[0.3], &p, &cfg).unwrap();
        assert_eq!(out, vec![3.0; 3]);
    }

    #[test]
    fn forward_matches_oracle() {
        let mut s = 11u64;
        let cfg = ForecastConfig { history: 6, horizon: 4, d_t: 3, d_s: 2, hidden: 5, leaky_slope: 0.1, ..Default::default() };
        let mut p = ForecasterParams::zeros(6, 4, 3, 2, 5);
        for t in [&mut p.embed_w, &mut p.embed_b, &mut p.enc_w, &mut p.enc_b, &mut p.dec_w, &mut p.dec_b] {
            fill(t, &mut s);
        }
        let mut w = vec![0.0; 6];
        fill(&mut w, &mut s);
        let zp = [0.4, -0.9];

        let mean = w.iter().sum::<f64>() / 6.0;
        let var = w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 6.0;
        let sd = (var + cfg.epsilon_revin).sqrt();
        let n: Vec<f64> = w.iter().map(|x| (x - mean) / sd).collect();
        let mut sp = oracle_matvec(&p.embed_w, &p.embed_b, &n);
        sp.extend_from_slice(&zp);
        let h = oracle_lrelu(oracle_matvec(&p.enc_w, &p.enc_b, &sp), 0.1);
        let o = oracle_matvec(&p.dec_w, &p.dec_b, &h);
        let expect = revin_denormalize(&o, mean, sd);

        let got = forecaster_forward(&w, &zp, &p, &cfg).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_equivariance() {
        let mut s = 5u64;
        let cfg = ForecastConfig { history: 5, horizon: 3, d_t: 4, d_s: 0, hidden: 6, ..Default::default() };
        let p = ForecasterParams::init(5, 3, 4, 0, 6, 1);
        let mut w = vec![0.0; 5];
        fill(&mut w, &mut s);
        let base = forecaster_forward(&w, &[], &p, &cfg).unwrap();
        let shifted: Vec<f64> = w.iter().map(|x| x + 8.0).collect();
        let out = forecaster_forward(&shifted, &[], &p, &cfg).unwrap();
        for (a, b) in out.iter().zip(&base) {
            assert!((a - b - 8.0).abs() < 1e-9);
        }
    }
}
