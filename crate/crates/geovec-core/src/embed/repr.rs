use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{embed_text, BoxError, EmbedError, EmbeddingProvider};
use crate::geo::{Coordinate, NodeSet};
use crate::hash::Fnv1a;
use crate::prompt::{build_prompt, Prompt, PromptVariant};

/// The `M x N` embedding matrix with one column per node, plus the provider and prompt it came from.
///
/// Values are kept at f32, the precision of the wire protocol and the store.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoRepresentation {
    node_ids: Vec<String>,
    dim: usize,
    // column-major: column j is node j
    data: Vec<f32>,
    pub provider_id: String,
    pub variant: PromptVariant,
    pub prompt_hash: u64,
}

impl GeoRepresentation {
    pub fn from_columns(
        node_ids: Vec<String>,
        dim: usize,
        data: Vec<f32>,
        provider_id: String,
        variant: PromptVariant,
        prompt_hash: u64,
    ) -> Result<Self, EmbedError> {
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        if data.len() != dim * node_ids.len() {
            return Err(EmbedError::Shape(format!(
                "{} values for {} nodes of dimension {}",
                data.len(),
                node_ids.len(),
                dim
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::NonFinite);
        }
        Ok(GeoRepresentation {
            node_ids,
            dim,
            data,
            provider_id,
            variant,
            prompt_hash,
        })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, j: usize) -> &[f32] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn column_by_id(&self, id: &str) -> Option<&[f32]> {
        self.node_ids.iter().position(|x| x == id).map(|j| self.column(j))
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[col * self.dim + row]
    }

    /// Column-major values.
    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Column `j` widened to f64.
    pub fn column_f64(&self, j: usize) -> Vec<f64> {
        self.column(j).iter().map(|&v| f64::from(v)).collect()
    }

    /// The representation restricted to (and reordered as) `ids`.
    pub fn select(&self, ids: &[String]) -> Option<GeoRepresentation> {
        let mut data = Vec::with_capacity(ids.len() * self.dim);
        for id in ids {
            data.extend_from_slice(self.column_by_id(id)?);
        }
        Some(GeoRepresentation {
            node_ids: ids.to_vec(),
            dim: self.dim,
            data,
            provider_id: self.provider_id.clone(),
            variant: self.variant,
            prompt_hash: self.prompt_hash,
        })
    }
}

/// Hash over every prompt text in node order.
pub fn prompt_hash<'a>(texts: impl IntoIterator<Item = &'a str>) -> u64 {
    let mut h = Fnv1a::new();
    for t in texts {
        h.write(&(t.len() as u64).to_le_bytes());
        h.write(t.as_bytes());
    }
    h.finish()
}

/// Produces the prompt for a node.
pub trait PromptSource {
    fn prompt(&self, node_id: &str, coord: Coordinate, variant: PromptVariant) -> Result<Prompt, BoxError>;
}

impl<S: PromptSource + ?Sized> PromptSource for &S {
    fn prompt(&self, node_id: &str, coord: Coordinate, variant: PromptVariant) -> Result<Prompt, BoxError> {
        (**self).prompt(node_id, coord, variant)
    }
}

/// Prompts that need no map data: only the instruction-only variant works.
#[derive(Debug, Clone, Copy, Default)]
pub struct InstructionPrompts;

impl PromptSource for InstructionPrompts {
    fn prompt(&self, _node_id: &str, coord: Coordinate, variant: PromptVariant) -> Result<Prompt, BoxError> {
        build_prompt(variant, coord, None, None).map_err(|e| Box::new(e) as BoxError)
    }
}

/// Prompt and pooled embedding for one node, with the node id attached to
/// any failure.
pub fn embed_node<P, S>(
    node_id: &str,
    coord: Coordinate,
    provider: &P,
    variant: PromptVariant,
    source: &S,
) -> Result<(Prompt, Vec<f32>), EmbedError>
where
    P: EmbeddingProvider + ?Sized,
    S: PromptSource + ?Sized,
{
    let prompt = source.prompt(node_id, coord, variant).map_err(|source| EmbedError::Prompt {
        id: String::from(node_id),
        source,
    })?;
    let v = embed_text(provider, &prompt).map_err(|e| EmbedError::Node {
        id: String::from(node_id),
        source: Box::new(e),
    })?;
    Ok((prompt, v))
}

/// Embeds every node in order. Any failing node fails the whole build.
pub fn build_geovec<P, S>(
    nodes: &NodeSet,
    provider: &P,
    variant: PromptVariant,
    source: &S,
) -> Result<GeoRepresentation, EmbedError>
where
    P: EmbeddingProvider + ?Sized,
    S: PromptSource + ?Sized,
{
    let mut texts = Vec::with_capacity(nodes.len());
    let mut data = Vec::with_capacity(nodes.len() * provider.dim());
    for (id, coord) in nodes.iter() {
        let (prompt, v) = embed_node(id, coord, provider, variant, source)?;
        texts.push(prompt.text);
        data.extend_from_slice(&v);
    }
    GeoRepresentation::from_columns(
        nodes.ids().to_vec(),
        provider.dim(),
        data,
        String::from(provider.id()),
        variant,
        prompt_hash(texts.iter().map(String::as_str)),
    )
}
