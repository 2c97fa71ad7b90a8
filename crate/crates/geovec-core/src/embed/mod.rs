//! Geolocation embeddings: per-token hidden states from a provider are
//! mean-pooled into one vector per prompt, and one prompt per node yields the
//! `M x N` representation matrix.

mod provider;
mod repr;
pub mod store;

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub use provider::{mock_token_vector, rff_embed, EmbeddingProvider, MockProvider, ProviderMode, RffProvider};
pub use repr::{build_geovec, embed_node, prompt_hash, GeoRepresentation, InstructionPrompts, PromptSource};

pub type BoxError = Box<dyn core::error::Error + Send + Sync>;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("token matrix has no rows")]
    EmptyTokenMatrix,
    #[error("token matrix rows have inconsistent widths")]
    RaggedTokenMatrix,
    #[error("non-finite value in token states")]
    NonFinite,
    #[error("embedding dimension must be at least 1")]
    ZeroDimension,
    #[error("random Fourier features need an even dimension, got {0}")]
    OddDimension(usize),
    #[error("lengthscale must be positive and finite")]
    BadLengthscale,
    #[error("provider returned dimension {got}, declared {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("prompt text is empty")]
    EmptyPrompt,
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("node `{id}`: {source}")]
    Node {
        id: String,
        #[source]
        source: Box<EmbedError>,
    },
    #[error("prompt for node `{id}`: {source}")]
    Prompt {
        id: String,
        #[source]
        source: BoxError,
    },
    #[error("representation shape: {0}")]
    Shape(String),
}

/// Last-layer hidden states, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f32>,
}

impl TokenMatrix {
    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self, EmbedError> {
        let t = rows.len();
        if t == 0 {
            return Err(EmbedError::EmptyTokenMatrix);
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        let mut data = Vec::with_capacity(t * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(EmbedError::RaggedTokenMatrix);
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(t, dim, data)
    }

    pub fn from_flat(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self, EmbedError> {
        if rows == 0 {
            return Err(EmbedError::EmptyTokenMatrix);
        }
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        if data.len() != rows * dim {
            return Err(EmbedError::RaggedTokenMatrix);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(TokenMatrix { rows, dim, data })
    }

    pub fn tokens(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

/// Arithmetic mean over the token axis, accumulated in f64.
pub fn mean_pool(tokens: &TokenMatrix) -> Vec<f32> {
    let mut acc = alloc::vec![0.0f64; tokens.dim];
    for t in 0..tokens.rows {
        for (a, &v) in acc.iter_mut().zip(tokens.row(t)) {
            *a += f64::from(v);
        }
    }
    let n = tokens.rows as f64;
    acc.into_iter().map(|a| (a / n) as f32).collect()
}

/// Pooled embedding of one prompt, checked against the provider's declared
/// dimension.
pub fn embed_text<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    prompt: &crate::prompt::Prompt,
) -> Result<Vec<f32>, EmbedError> {
    if prompt.text.trim().is_empty() {
        return Err(EmbedError::EmptyPrompt);
    }
    let states = provider.token_states(prompt)?;
    if states.dim() != provider.dim() {
        return Err(EmbedError::DimMismatch {
            expected: provider.dim(),
            got: states.dim(),
        });
    }
    Ok(mean_pool(&states))
}
