use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use libm::{cos, sin, sqrt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{EmbedError, TokenMatrix};
use crate::geo::Coordinate;
use crate::hash::{hash64, splitmix64};
use crate::prompt::Prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProviderMode {
    Remote,
    Mock,
    Rff,
}

impl fmt::Display for ProviderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderMode::Remote => "remote",
            ProviderMode::Mock => "mock",
            ProviderMode::Rff => "rff",
        })
    }
}

/// Source of per-token last-layer states for a prompt.
///
/// For a fixed `id` and prompt the returned matrix must be deterministic.
pub trait EmbeddingProvider {
    fn id(&self) -> &str;
    fn dim(&self) -> usize;
    fn mode(&self) -> ProviderMode;
    fn token_states(&self, prompt: &Prompt) -> Result<TokenMatrix, EmbedError>;
}

impl<P: EmbeddingProvider + ?Sized> EmbeddingProvider for &P {
    fn id(&self) -> &str {
        (**self).id()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn mode(&self) -> ProviderMode {
        (**self).mode()
    }
    fn token_states(&self, prompt: &Prompt) -> Result<TokenMatrix, EmbedError> {
        (**self).token_states(prompt)
    }
}

/// `dim` values uniform in `[-1, 1)` expanded from `hash64(seed, token)`.
pub fn mock_token_vector(token: &str, dim: usize, seed: u64) -> Vec<f32> {
    let mut state = hash64(seed, token.as_bytes());
    (0..dim)
        .map(|_| {
            let bits = splitmix64(&mut state) >> 11;
            let unit = bits as f64 / (1u64 << 53) as f64;
            (2.0 * unit - 1.0) as f32
        })
        .collect()
}

/// Whitespace tokenizer with hashed token vectors. Deterministic and free;
/// used wherever a real model is not needed.
#[derive(Debug, Clone)]
pub struct MockProvider {
    id: String,
    dim: usize,
    seed: u64,
}

impl MockProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        Ok(MockProvider {
            id: format!("mock-d{dim}-s{seed}"),
            dim,
            seed,
        })
    }
}

impl EmbeddingProvider for MockProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Mock
    }

    fn token_states(&self, prompt: &Prompt) -> Result<TokenMatrix, EmbedError> {
        let rows: Vec<Vec<f32>> = prompt
            .text
            .split_whitespace()
            .map(|tok| mock_token_vector(tok, self.dim, self.seed))
            .collect();
        TokenMatrix::from_rows(rows)
    }
}

fn rff_frequencies(dim: usize, seed: u64, lengthscale_deg: f64) -> Result<Vec<[f64; 2]>, EmbedError> {
    if dim == 0 {
        return Err(EmbedError::ZeroDimension);
    }
    if dim % 2 != 0 {
        return Err(EmbedError::OddDimension(dim));
    }
    if !(lengthscale_deg.is_finite() && lengthscale_deg > 0.0) {
        return Err(EmbedError::BadLengthscale);
    }
    let normal = Normal::new(0.0, 1.0 / lengthscale_deg).map_err(|_| EmbedError::BadLengthscale)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..dim / 2)
        .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
        .collect())
}

fn rff_features(freqs: &[[f64; 2]], coord: Coordinate) -> Vec<f64> {
    let m = freqs.len() * 2;
    let scale = sqrt(2.0 / m as f64);
    let mut out = alloc::vec![0.0; m];
    for (j, w) in freqs.iter().enumerate() {
        let phase = w[0] * coord.lon() + w[1] * coord.lat();
        out[2 * j] = scale * cos(phase);
        out[2 * j + 1] = scale * sin(phase);
    }
    out
}

/// Random Fourier features of `(lon, lat)` approximating a Gaussian kernel
/// with the given lengthscale in degrees.
pub fn rff_embed(
    coord: Coordinate,
    dim: usize,
    seed: u64,
    lengthscale_deg: f64,
) -> Result<Vec<f64>, EmbedError> {
    let freqs = rff_frequencies(dim, seed, lengthscale_deg)?;
    Ok(rff_features(&freqs, coord))
}

/// Coordinate-only synthetic provider: one "token" holding the random Fourier
/// features of the prompt's coordinate.
#[derive(Debug, Clone)]
pub struct RffProvider {
    id: String,
    freqs: Vec<[f64; 2]>,
}

impl RffProvider {
    pub fn new(dim: usize, seed: u64, lengthscale_deg: f64) -> Result<Self, EmbedError> {
        let freqs = rff_frequencies(dim, seed, lengthscale_deg)?;
        Ok(RffProvider {
            id: format!("rff-d{dim}-l{lengthscale_deg}-s{seed}"),
            freqs,
        })
    }

    pub fn features(&self, coord: Coordinate) -> Vec<f64> {
        rff_features(&self.freqs, coord)
    }
}

impl EmbeddingProvider for RffProvider {
    fn id(&self) -> &str {
        &self.id
    }

    fn dim(&self) -> usize {
        self.freqs.len() * 2
    }

    fn mode(&self) -> ProviderMode {
        ProviderMode::Rff
    }

    fn token_states(&self, prompt: &Prompt) -> Result<TokenMatrix, EmbedError> {
        let row: Vec<f32> = self.features(prompt.coord).into_iter().map(|v| v as f32).collect();
        TokenMatrix::from_flat(1, row.len(), row)
    }
}
