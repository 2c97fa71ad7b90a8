//! Multivariate time series and chronological splitting.

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("{values} values for {rows} timestamps x {nodes} nodes")]
    Shape { rows: usize, nodes: usize, values: usize },
    #[error("timestamps must be strictly increasing (row {0})")]
    NonMonotonicTimestamps(usize),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("split ratios must be positive and sum to 1")]
    BadRatios,
    #[error("split `{split}` has {len} steps, needs at least {needed}")]
    TooShort { split: &'static str, len: usize, needed: usize },
}

/// `T x N` values, row `t` holding every node at timestamp `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesDataset {
    node_ids: Vec<String>,
    /// Seconds since the Unix epoch.
    timestamps: Vec<i64>,
    values: Vec<f64>,
}

impl TimeSeriesDataset {
    pub fn new(node_ids: Vec<String>, timestamps: Vec<i64>, values: Vec<f64>) -> Result<Self, SeriesError> {
        let (t, n) = (timestamps.len(), node_ids.len());
        if values.len() != t * n {
            return Err(SeriesError::Shape { rows: t, nodes: n, values: values.len() });
        }
        if let Some(i) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SeriesError::NonMonotonicTimestamps(i + 1));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { row: k / n, col: k % n });
        }
        Ok(TimeSeriesDataset { node_ids, timestamps, values })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn value(&self, t: usize, node: usize) -> f64 {
        self.values[t * self.node_ids.len() + node]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let n = self.node_ids.len();
        &self.values[t * n..(t + 1) * n]
    }

    /// Row-major `T x N` values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Values of one node over `start..start + len`.
    pub fn node_window(&self, node: usize, start: usize, len: usize) -> Vec<f64> {
        (start..start + len).map(|t| self.value(t, node)).collect()
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> TimeSeriesDataset {
        let n = self.node_ids.len();
        TimeSeriesDataset {
            node_ids: self.node_ids.clone(),
            timestamps: self.timestamps[start..end].to_vec(),
            values: self.values[start * n..end * n].to_vec(),
        }
    }

    /// Number of stride-1 windows of `history + horizon` steps.
    pub fn window_count(&self, history: usize, horizon: usize) -> usize {
        (self.len() + 1).saturating_sub(history + horizon)
    }
}

pub const DEFAULT_SPLIT: (f64, f64, f64) = (0.7, 0.1, 0.2);

/// Contiguous train/validation/test split with boundaries at
/// `floor(T * r1)` and `floor(T * (r1 + r2))`. Every part must fit at least
/// one window of `min_len` steps.
pub fn chronological_split(
    ds: &TimeSeriesDataset,
    ratios: (f64, f64, f64),
    min_len: usize,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset, TimeSeriesDataset), SeriesError> {
    let (a, b, c) = ratios;
    let positive = a > 0.0 && b > 0.0 && c > 0.0;
    if !positive || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(SeriesError::BadRatios);
    }
    let t = ds.len();
    // Small epsilon so that e.g. 100 * 0.7 lands on 70 rather than 69.
    let cut = |r: f64| -> usize { libm::floor(t as f64 * r + 1e-9).min(t as f64) as usize };
    let b1 = cut(a);
    let b2 = cut(a + b).max(b1);
    let parts = [("train", 0, b1), ("val", b1, b2), ("test", b2, t)];
    for (name, s, e) in parts {
        if e - s < min_len {
            return Err(SeriesError::TooShort { split: name, len: e - s, needed: min_len });
        }
    }
    Ok((ds.slice(0, b1), ds.slice(b1, b2), ds.slice(b2, t)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn ds(t: usize, n: usize) -> TimeSeriesDataset {
        TimeSeriesDataset::new(
            (0..n).map(|i| format!("n{i}")).collect(),
            (0..t as i64).map(|x| x * 3600).collect(),
            (0..t * n).map(|x| x as f64 * 0.5).collect(),
        )
        .unwrap()
    }

    #[test]
    fn seventy_ten_twenty() {
        let d = ds(100, 2);
        let (tr, va, te) = chronological_split(&d, DEFAULT_SPLIT, 5).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (70, 10, 20));
        let mut joined = tr.values().to_vec();
        joined.extend_from_slice(va.values());
        joined.extend_from_slice(te.values());
        assert_eq!(joined, d.values());
    }

    #[test]
    fn too_short() {
        let d = ds(10, 1);
        assert!(matches!(
            chronological_split(&d, DEFAULT_SPLIT, 20),
            Err(SeriesError::TooShort { .. })
        ));
        assert_eq!(chronological_split(&d, (0.5, 0.5, 0.1), 1), Err(SeriesError::BadRatios));
    }

    #[test]
    fn monotonic_check() {
        let r = TimeSeriesDataset::new(vec!["a".into()], vec![0, 5, 5], vec![1.0, 2.0, 3.0]);
        assert_eq!(r, Err(SeriesError::NonMonotonicTimestamps(2)));
    }

    #[test]
    fn window_count() {
        assert_eq!(ds(10, 1).window_count(3, 2), 6);
        assert_eq!(ds(4, 1).window_count(3, 2), 0);
    }

    #[test]
    fn splits_partition_for_many_lengths() {
        for t in 3..200 {
            let d = ds(t, 1);
            if let Ok((a, b, c)) = chronological_split(&d, DEFAULT_SPLIT, 1) {
                assert_eq!(a.len() + b.len() + c.len(), t);
                assert_eq!(a.timestamps().last().unwrap() + 3600, b.timestamps()[0]);
                assert_eq!(b.timestamps().last().unwrap() + 3600, c.timestamps()[0]);
            }
        }
    }
}
