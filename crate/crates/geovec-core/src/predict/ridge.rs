use alloc::vec;
use alloc::vec::Vec;

use super::standardize::{standardize_fit, Standardizer};
use super::PredictError;
use crate::linalg::{dot, solve_spd, Matrix};

/// Regularization strength used when none is given.
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Linear model on standardized features with an unpenalized intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeModel {
    /// One weight per kept feature.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub alpha: f64,
    pub scaler: Standardizer,
}

impl RidgeModel {
    /// Standardizes `x`, then fits on the kept columns.
    pub fn fit(x: &Matrix, y: &[f64], alpha: f64) -> Result<Self, PredictError> {
        if x.rows() < 2 {
            return Err(PredictError::TooFewSamples { needed: 2, got: x.rows() });
        }
        let (xz, scaler) = standardize_fit(x);
        let mut model = ridge_fit(&xz, y, alpha)?;
        model.scaler = scaler;
        Ok(model)
    }

    pub fn n_features(&self) -> usize {
        self.scaler.n_features
    }
}

fn check_finite(values: &[f64]) -> Result<(), PredictError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(PredictError::NonFinite)
    }
}

/// Solves `(Xᵀ X + αI) w = Xᵀ (y - ȳ)` for already standardized `xz`; the
/// intercept is `ȳ`. The returned model's scaler is the identity on all
/// columns of `xz`.
pub fn ridge_fit(xz: &Matrix, y: &[f64], alpha: f64) -> Result<RidgeModel, PredictError> {
    let (k, m) = (xz.rows(), xz.cols());
    if k == 0 {
        return Err(PredictError::TooFewSamples { needed: 1, got: 0 });
    }
    if y.len() != k {
        return Err(PredictError::LengthMismatch { rows: k, targets: y.len() });
    }
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(PredictError::BadAlpha);
    }
    check_finite(xz.as_slice())?;
    check_finite(y)?;

    let y_mean = y.iter().sum::<f64>() / k as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let weights = if m == 0 {
        Vec::new()
    } else {
        let mut a = xz.gram();
        for j in 0..m {
            a[(j, j)] += alpha;
        }
        let b = xz.t_mul_vec(&yc);
        let w = solve_spd(&a, &b).ok_or(PredictError::SingularSystem)?;
        check_finite(&w).map_err(|_| PredictError::SingularSystem)?;
        w
    };
    Ok(RidgeModel {
        weights,
        intercept: y_mean,
        alpha,
        scaler: Standardizer {
            n_features: m,
            kept: (0..m).collect(),
            means: vec![0.0; m],
            stds: vec![1.0; m],
        },
    })
}

/// Predictions for raw feature rows; standardization is applied internally.
pub fn ridge_predict(model: &RidgeModel, x: &Matrix) -> Result<Vec<f64>, PredictError> {
    if x.cols() != model.n_features() {
        return Err(PredictError::DimMismatch {
            expected: model.n_features(),
            got: x.cols(),
        });
    }
    let xz = model.scaler.apply(x);
    Ok((0..xz.rows())
        .map(|i| dot(xz.row(i), &model.weights) + model.intercept)
        .collect())
}

/// `‖y − Xw − b‖² + α‖w‖²`.
pub fn ridge_objective(x: &Matrix, y: &[f64], weights: &[f64], intercept: f64, alpha: f64) -> f64 {
    let sse: f64 = (0..x.rows())
        .map(|i| {
            let e = y[i] - dot(x.row(i), weights) - intercept;
            e * e
        })
        .sum();
    sse + alpha * dot(weights, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hash::splitmix64;

    fn uniform(seed: &mut u64) -> f64 {
        (splitmix64(seed) >> 11) as f64 / (1u64 << 53) as f64
    }

    fn random_problem(k: usize, m: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut s = seed;
        let x = Matrix::from_vec(k, m, (0..k * m).map(|_| uniform(&mut s) * 4.0 - 2.0).collect());
        let y = (0..k)
            .map(|i| x.row(i).iter().enumerate().map(|(j, v)| v * (j as f64 - 3.0)).sum::<f64>() + uniform(&mut s))
            .collect();
        (x, y)
    }

    #[test]
    fn exact_linear_data() {
        let x = Matrix::from_vec(4, 1, vec![-1.5, -0.5, 0.5, 1.5]);
        let y: Vec<f64> = x.as_slice().iter().map(|v| 2.0 * v + 3.0).collect();
        let m = ridge_fit(&x, &y, 0.0).unwrap();
        assert!((m.weights[0] - 2.0).abs() < 1e-10);
        assert_eq!(m.intercept, 3.0);
        let p = ridge_predict(&m, &x).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn huge_alpha_shrinks_to_mean() {
        let (x, y) = random_problem(60, 5, 3);
        let m = RidgeModel::fit(&x, &y, 1e12).unwrap();
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6));
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        for p in ridge_predict(&m, &x).unwrap() {
            assert!((p - ybar).abs() < 1e-5);
        }
    }

    #[test]
    fn zero_weights_give_intercept() {
        let (x, _) = random_problem(5, 3, 1);
        let mut m = RidgeModel::fit(&x, &[1.0, 2.0, 3.0, 4.0, 5.0], 1.0).unwrap();
        m.weights.iter_mut().for_each(|w| *w = 0.0);
        assert!(ridge_predict(&m, &x).unwrap().iter().all(|&p| p == m.intercept));
    }

    #[test]
    fn singular_without_regularization() {
        // Duplicated column, no ridge: XᵀX is rank one. The jitter fallback is
        // allowed to recover, so only assert that a result is finite or the
        // error is the singular one.
        let x = Matrix::from_vec(3, 2, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        match ridge_fit(&x, &[1.0, 2.0, 3.0], 0.0) {
            Ok(m) => assert!(m.weights.iter().all(|w| w.is_finite())),
            Err(e) => assert_eq!(e, PredictError::SingularSystem),
        }
        let zero = Matrix::zeros(3, 2);
        assert_eq!(ridge_fit(&zero, &[1.0, 2.0, 3.0], 0.0), Err(PredictError::SingularSystem));
    }

    #[test]
    fn predict_checks_width() {
        let (x, y) = random_problem(10, 3, 2);
        let m = RidgeModel::fit(&x, &y, 1.0).unwrap();
        let bad = Matrix::zeros(2, 4);
        assert_eq!(ridge_predict(&m, &bad), Err(PredictError::DimMismatch { expected: 3, got: 4 }));
    }

    #[test]
    fn predict_matches_scalar_loop() {
        let (x, y) = random_problem(30, 4, 8);
        let m = RidgeModel::fit(&x, &y, 0.5).unwrap();
        let p = ridge_predict(&m, &x).unwrap();
        for i in 0..30 {
            let mut acc = m.intercept;
            for (k, &j) in m.scaler.kept.iter().enumerate() {
                acc += (x[(i, j)] - m.scaler.means[k]) / m.scaler.stds[k] * m.weights[k];
            }
            assert!((acc - p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_feature_does_not_change_predictions() {
        let (x, y) = random_problem(25, 3, 4);
        let mut rows = Vec::new();
        for i in 0..25 {
            let mut r = x.row(i).to_vec();
            r.insert(1, 7.0);
            rows.push(r);
        }
        let xc = Matrix::from_rows(&rows);
        let a = ridge_predict(&RidgeModel::fit(&x, &y, 1.0).unwrap(), &x).unwrap();
        let b = ridge_predict(&RidgeModel::fit(&xc, &y, 1.0).unwrap(), &xc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn closed_form_is_locally_optimal() {
        let (x, y) = random_problem(40, 5, 6);
        let (xz, _) = standardize_fit(&x);
        let m = ridge_fit(&xz, &y, 1.0).unwrap();
        let best = ridge_objective(&xz, &y, &m.weights, m.intercept, 1.0);
        let mut s = 99u64;
        for _ in 0..1000 {
            let dir: Vec<f64> = (0..5).map(|_| uniform(&mut s) * 2.0 - 1.0).collect();
            let norm = libm::sqrt(dot(&dir, &dir));
            let w: Vec<f64> = m.weights.iter().zip(&dir).map(|(w, d)| w + 1e-3 * d / norm).collect();
            assert!(best <= ridge_objective(&xz, &y, &w, m.intercept, 1.0));
        }
    }
}
