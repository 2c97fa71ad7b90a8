use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, Metrics};
use super::ridge::{ridge_predict, RidgeModel};
use super::PredictError;
use crate::embed::GeoRepresentation;
use crate::hash::Fnv1a;
use crate::linalg::Matrix;

/// One scalar target per node.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeVector {
    pub name: String,
    pub node_ids: Vec<String>,
    pub values: Vec<f64>,
}

impl AttributeVector {
    pub fn new(name: String, node_ids: Vec<String>, values: Vec<f64>) -> Result<Self, PredictError> {
        if node_ids.len() != values.len() {
            return Err(PredictError::LengthMismatch {
                rows: node_ids.len(),
                targets: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(PredictError::NonFinite);
        }
        Ok(AttributeVector { name, node_ids, values })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub attribute: String,
    pub provider_id: String,
    pub n: usize,
    pub dim: usize,
    pub folds: usize,
    pub alpha: f64,
    pub seed: u64,
    pub per_fold: Vec<FoldMetrics>,
    pub mean_mae: f64,
    pub mean_rmse: f64,
    pub mean_r2: f64,
}

/// Seeded Fisher–Yates shuffle of `0..n`, cut into `folds` contiguous chunks
/// whose sizes differ by at most one (larger chunks first).
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, PredictError> {
    if folds < 2 || folds > n {
        return Err(PredictError::InvalidFolds { folds, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// Rows of the design matrix and targets, in lexicographic id order so
/// results do not depend on input ordering.
fn aligned(z: &GeoRepresentation, a: &AttributeVector) -> Result<(Vec<String>, Matrix, Vec<f64>), PredictError> {
    let zpos: BTreeMap<&str, usize> = z.node_ids().iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let apos: BTreeMap<&str, usize> = a.node_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    if zpos.len() != z.len() || apos.len() != a.node_ids.len() {
        return Err(PredictError::Misalignment(String::from("duplicate ids")));
    }
    if let Some(id) = apos.keys().find(|id| !zpos.contains_key(*id)) {
        return Err(PredictError::Misalignment(format!("`{id}` has no embedding")));
    }
    if let Some(id) = zpos.keys().find(|id| !apos.contains_key(*id)) {
        return Err(PredictError::Misalignment(format!("`{id}` has no attribute value")));
    }
    let ids: Vec<String> = apos.keys().map(|s| String::from(*s)).collect();
    let m = z.dim();
    let mut data = Vec::with_capacity(ids.len() * m);
    let mut y = Vec::with_capacity(ids.len());
    for id in &ids {
        data.extend(z.column(zpos[id.as_str()]).iter().map(|&v| f64::from(v)));
        y.push(a.values[apos[id.as_str()]]);
    }
    Ok((ids.clone(), Matrix::from_vec(ids.len(), m, data), y))
}

fn fit_and_score(x: &Matrix, y: &[f64], train: &[usize], test: &[usize], alpha: f64) -> Result<Metrics, PredictError> {
    let xtr = x.select_rows(train);
    let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = RidgeModel::fit(&xtr, &ytr, alpha)?;
    let pred = ridge_predict(&model, &x.select_rows(test))?;
    let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    metrics(&yte, &pred)
}

/// K-fold cross-validated ridge regression from embeddings to an attribute.
/// Each fold standardizes and fits on its training part only.
pub fn kfold_cv(
    z: &GeoRepresentation,
    a: &AttributeVector,
    folds: usize,
    alpha: f64,
    seed: u64,
) -> Result<CvReport, PredictError> {
    let (_, x, y) = aligned(z, a)?;
    let n = y.len();
    let assignment = fold_assignment(n, folds, seed)?;
    let mut per_fold = Vec::with_capacity(folds);
    for (f, test) in assignment.iter().enumerate() {
        let mut in_test = alloc::vec![false; n];
        for &i in test {
            in_test[i] = true;
        }
        let mut test_sorted = test.clone();
        test_sorted.sort_unstable();
        let train: Vec<usize> = (0..n).filter(|&i| !in_test[i]).collect();
        let m = fit_and_score(&x, &y, &train, &test_sorted, alpha)?;
        per_fold.push(FoldMetrics {
            fold: f,
            train_size: train.len(),
            test_size: test.len(),
            mae: m.mae,
            rmse: m.rmse,
            r2: m.r2,
        });
    }
    let k = per_fold.len() as f64;
    Ok(CvReport {
        attribute: a.name.clone(),
        provider_id: z.provider_id.clone(),
        n,
        dim: z.dim(),
        folds,
        alpha,
        seed,
        mean_mae: per_fold.iter().map(|f| f.mae).sum::<f64>() / k,
        mean_rmse: per_fold.iter().map(|f| f.rmse).sum::<f64>() / k,
        mean_r2: per_fold.iter().map(|f| f.r2).sum::<f64>() / k,
        per_fold,
    })
}

/// Fixed train/test id lists. Overlap is rejected unless the split was
/// explicitly built as in-sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    train: Vec<String>,
    test: Vec<String>,
}

impl HoldoutSplit {
    pub fn new(train: Vec<String>, test: Vec<String>) -> Result<Self, PredictError> {
        let mut seen: BTreeMap<&str, ()> = BTreeMap::new();
        for id in &train {
            seen.insert(id.as_str(), ());
        }
        if let Some(id) = test.iter().find(|id| seen.contains_key(id.as_str())) {
            return Err(PredictError::OverlapDetected(id.clone()));
        }
        Ok(HoldoutSplit { train, test })
    }

    /// Trains and tests on the same ids; only useful as an optimism check.
    pub fn in_sample(ids: Vec<String>) -> Self {
        HoldoutSplit { train: ids.clone(), test: ids }
    }

    pub fn train(&self) -> &[String] {
        &self.train
    }

    pub fn test(&self) -> &[String] {
        &self.test
    }
}

pub fn holdout_eval(
    z: &GeoRepresentation,
    a: &AttributeVector,
    split: &HoldoutSplit,
    alpha: f64,
) -> Result<Metrics, PredictError> {
    let (ids, x, y) = aligned(z, a)?;
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let lookup = |list: &[String]| -> Result<Vec<usize>, PredictError> {
        list.iter()
            .map(|id| {
                pos.get(id.as_str())
                    .copied()
                    .ok_or_else(|| PredictError::Misalignment(format!("split id `{id}` is unknown")))
            })
            .collect()
    };
    let train = lookup(&split.train)?;
    let test = lookup(&split.test)?;
    fit_and_score(&x, &y, &train, &test, alpha)
}

/// Stacks representations feature-wise. All inputs must list the same nodes
/// in the same order.
pub fn concat_representations(reps: &[GeoRepresentation]) -> Result<GeoRepresentation, PredictError> {
    let first = reps.first().ok_or(PredictError::NodeMismatch)?;
    if reps.iter().any(|r| r.node_ids() != first.node_ids()) {
        return Err(PredictError::NodeMismatch);
    }
    let dim: usize = reps.iter().map(GeoRepresentation::dim).sum();
    let mut data = Vec::with_capacity(dim * first.len());
    for j in 0..first.len() {
        for r in reps {
            data.extend_from_slice(r.column(j));
        }
    }
    let provider_id = reps.iter().map(|r| r.provider_id.as_str()).collect::<Vec<_>>().join("+");
    let prompt_hash = if reps.len() == 1 {
        first.prompt_hash
    } else {
        let mut h = Fnv1a::new();
        for r in reps {
            h.write(&r.prompt_hash.to_le_bytes());
        }
        h.finish()
    };
    GeoRepresentation::from_columns(first.node_ids().to_vec(), dim, data, provider_id, first.variant, prompt_hash)
        .map_err(|_| PredictError::NodeMismatch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::PromptVariant;
    use alloc::string::ToString;
    use alloc::vec;

    fn rep(ids: &[&str], dim: usize, f: impl Fn(usize, usize) -> f32) -> GeoRepresentation {
        let data = (0..ids.len()).flat_map(|j| (0..dim).map(move |i| (j, i))).map(|(j, i)| f(j, i)).collect();
        GeoRepresentation::from_columns(
            ids.iter().map(|s| s.to_string()).collect(),
            dim,
            data,
            "t".into(),
            PromptVariant::InstructionOnly,
            1,
        )
        .unwrap()
    }

    #[test]
    fn ten_into_five_folds() {
        let folds = fold_assignment(10, 5, 42).unwrap();
        assert_eq!(folds.len(), 5);
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn uneven_fold_sizes() {
        let folds = fold_assignment(11, 3, 0).unwrap();
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![4, 4, 3]);
        assert!(fold_assignment(3, 4, 0).is_err());
        assert!(fold_assignment(3, 1, 0).is_err());
    }

    #[test]
    fn concat_stacks_rows() {
        let ids = ["a", "b", "c"];
        let r1 = rep(&ids, 4, |j, i| (j * 10 + i) as f32);
        let r2 = rep(&ids, 3, |j, i| -((j * 10 + i) as f32));
        let c = concat_representations(&[r1.clone(), r2.clone()]).unwrap();
        assert_eq!(c.dim(), 7);
        for j in 0..3 {
            assert_eq!(&c.column(j)[..4], r1.column(j));
            assert_eq!(&c.column(j)[4..], r2.column(j));
        }
        assert_eq!(c.provider_id, "t+t");
        assert_eq!(concat_representations(&[r1.clone()]).unwrap(), r1);
        let r3 = rep(&["a", "c", "b"], 1, |_, _| 0.0);
        assert_eq!(concat_representations(&[r1, r3]), Err(PredictError::NodeMismatch));
    }

    #[test]
    fn misaligned_ids() {
        let z = rep(&["a", "b", "c", "d"], 2, |j, i| (j + i) as f32);
        let a = AttributeVector::new("x".into(), vec!["a".into(), "b".into(), "c".into(), "e".into()], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(kfold_cv(&z, &a, 2, 1.0, 0), Err(PredictError::Misalignment(_))));
    }

    #[test]
    fn overlap_detected() {
        assert_eq!(
            HoldoutSplit::new(vec!["a".into(), "b".into()], vec!["b".into()]),
            Err(PredictError::OverlapDetected("b".into()))
        );
    }
}
