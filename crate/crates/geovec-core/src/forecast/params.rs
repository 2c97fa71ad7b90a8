use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::hash::Fnv1a;

/// Uniform Glorot initialization of a `rows x cols` weight matrix.
fn glorot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let limit = sqrt(6.0 / (rows + cols) as f64);
    (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect()
}

/// Flat access to every parameter tensor, in a fixed order.
pub trait ParamTensors {
    fn tensors(&self) -> Vec<&[f64]>;
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// FNV-1a over tensor lengths and the bit patterns of every value.
    fn param_hash(&self) -> u64 {
        let mut h = Fnv1a::new();
        for t in self.tensors() {
            h.write(&(t.len() as u64).to_le_bytes());
            for v in t {
                h.write(&v.to_bits().to_le_bytes());
            }
        }
        h.finish()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// Temporal embedder `E`, encoder `C` and predictor `D`. All matrices are
/// row-major with `out x in` shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterParams {
    pub history: usize,
    pub horizon: usize,
    pub d_t: usize,
    pub d_s: usize,
    pub hidden: usize,
    pub embed_w: Vec<f64>,
    pub embed_b: Vec<f64>,
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

impl ForecasterParams {
    pub fn zeros(history: usize, horizon: usize, d_t: usize, d_s: usize, hidden: usize) -> Self {
        let width = d_t + d_s;
        ForecasterParams {
            history,
            horizon,
            d_t,
            d_s,
            hidden,
            embed_w: vec![0.0; d_t * history],
            embed_b: vec![0.0; d_t],
            enc_w: vec![0.0; hidden * width],
            enc_b: vec![0.0; hidden],
            dec_w: vec![0.0; horizon * hidden],
            dec_b: vec![0.0; horizon],
        }
    }

    pub fn init(history: usize, horizon: usize, d_t: usize, d_s: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(history, horizon, d_t, d_s, hidden);
        p.embed_w = glorot(&mut rng, d_t, history);
        p.enc_w = glorot(&mut rng, hidden, d_t + d_s);
        p.dec_w = glorot(&mut rng, horizon, hidden);
        p
    }

    /// Width of the concatenated encoder input.
    pub fn width(&self) -> usize {
        self.d_t + self.d_s
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.history, self.horizon, self.d_t, self.d_s, self.hidden)
    }

    pub fn shapes_match(&self, other: &Self) -> bool {
        (self.history, self.horizon, self.d_t, self.d_s, self.hidden)
            == (other.history, other.horizon, other.d_t, other.d_s, other.hidden)
    }
}

impl ParamTensors for ForecasterParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.embed_w, &self.embed_b, &self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            &mut self.embed_w,
            &mut self.embed_b,
            &mut self.enc_w,
            &mut self.enc_b,
            &mut self.dec_w,
            &mut self.dec_b,
        ]
    }
}

/// Two-layer adapter from an `input_dim` embedding to `d_s` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterParams {
    pub input_dim: usize,
    pub d_s: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl AdapterParams {
    pub fn zeros(input_dim: usize, d_s: usize) -> Self {
        AdapterParams {
            input_dim,
            d_s,
            w1: vec![0.0; d_s * input_dim],
            b1: vec![0.0; d_s],
            w2: vec![0.0; d_s * d_s],
            b2: vec![0.0; d_s],
        }
    }

    pub fn init(input_dim: usize, d_s: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(input_dim, d_s);
        p.w1 = glorot(&mut rng, d_s, input_dim);
        p.w2 = glorot(&mut rng, d_s, d_s);
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim, self.d_s)
    }
}

impl ParamTensors for AdapterParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![&self.w1, &self.b1, &self.w2, &self.b2]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }
}

/// Learnable per-node conditioning vectors (column-major, one column of
/// `d_s` values per node) with a fallback for nodes never seen in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeEmbeddingTable {
    pub node_ids: Vec<String>,
    pub d_s: usize,
    pub table: Vec<f64>,
    pub fallback: Vec<f64>,
}

impl NodeEmbeddingTable {
    pub fn init(node_ids: Vec<String>, d_s: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = node_ids.len();
        let table = glorot(&mut rng, d_s, n);
        let mut t = NodeEmbeddingTable {
            node_ids,
            d_s,
            table,
            fallback: vec![0.0; d_s],
        };
        t.refresh_fallback();
        t
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.table[j * self.d_s..(j + 1) * self.d_s]
    }

    /// The node's column, or the fallback for an unknown id.
    pub fn lookup(&self, id: &str) -> &[f64] {
        match self.node_ids.iter().position(|x| x == id) {
            Some(j) => self.column(j),
            None => &self.fallback,
        }
    }

    /// Sets the fallback to the column mean.
    pub fn refresh_fallback(&mut self) {
        let n = self.node_ids.len();
        let mut mean = vec![0.0; self.d_s];
        if n > 0 {
            for j in 0..n {
                for (m, v) in mean.iter_mut().zip(self.column(j)) {
                    *m += v;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
        }
        self.fallback = mean;
    }
}
