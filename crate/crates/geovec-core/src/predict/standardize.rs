use alloc::vec::Vec;

use libm::sqrt;

use crate::linalg::Matrix;

/// Column-wise z-scoring learned on training rows. Columns with zero spread
/// are dropped and only `kept` columns are scaled.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub n_features: usize,
    pub kept: Vec<usize>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn dropped(&self) -> Vec<usize> {
        (0..self.n_features).filter(|j| !self.kept.contains(j)).collect()
    }

    /// Kept columns of `x`, scaled with the stored statistics.
    pub fn apply(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.kept.len());
        for i in 0..x.rows() {
            let r = x.row(i);
            for (k, &j) in self.kept.iter().enumerate() {
                out[(i, k)] = (r[j] - self.means[k]) / self.stds[k];
            }
        }
        out
    }
}

/// Fits a [`Standardizer`] on `x` and returns the scaled kept columns.
/// Population statistics are used, so each kept column of the result has
/// mean 0 and variance 1.
pub fn standardize_fit(x: &Matrix) -> (Matrix, Standardizer) {
    let (k, m) = (x.rows(), x.cols());
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut stds = Vec::new();
    for j in 0..m {
        let mean = (0..k).map(|i| x[(i, j)]).sum::<f64>() / k as f64;
        let var = (0..k).map(|i| (x[(i, j)] - mean) * (x[(i, j)] - mean)).sum::<f64>() / k as f64;
        let std = sqrt(var);
        if std > 1e-12 * (1.0 + mean.abs()) {
            kept.push(j);
            means.push(mean);
            stds.push(std);
        }
    }
    let s = Standardizer {
        n_features: m,
        kept,
        means,
        stds,
    };
    (s.apply(x), s)
}
