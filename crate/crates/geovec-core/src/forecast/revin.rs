use alloc::vec::Vec;

use libm::sqrt;

/// Per-window instance normalization: `mu` is the mean, `sigma` the square
/// root of population variance plus `epsilon`.
pub fn revin_normalize(window: &[f64], epsilon: f64) -> (Vec<f64>, f64, f64) {
    let h = window.len() as f64;
    let mu = window.iter().sum::<f64>() / h;
    let var = window.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / h;
    let sigma = sqrt(var + epsilon);
    (window.iter().map(|x| (x - mu) / sigma).collect(), mu, sigma)
}

pub fn revin_denormalize(values: &[f64], mu: f64, sigma: f64) -> Vec<f64> {
    values.iter().map(|v| v * sigma + mu).collect()
}
