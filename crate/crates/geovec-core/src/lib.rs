//! Core algorithms for building and evaluating LLM-derived geolocation
//! embeddings.
//!
//! Everything in this crate is pure computation over in-memory values and
//! needs only `alloc`: geodesy and adjacency construction, prompt rendering,
//! token pooling and the embedding store codec, ridge-regression geographic
//! prediction, raster sampling, and the reference MLP forecaster with its
//! hand-written gradients. Network access, files and the command line live in
//! the `geovec` crate.

#![no_std]
#![deny(rust_2018_idioms)]

extern crate alloc;

pub mod embed;
pub mod forecast;
pub mod geo;
pub mod hash;
pub mod linalg;
pub mod places;
pub mod predict;
pub mod prompt;
pub mod raster;
pub mod series;
pub mod synth;

pub use embed::{EmbeddingProvider, GeoRepresentation, TokenMatrix};
pub use geo::{AdjacencyMatrix, CardinalDirection, Coordinate, NodeSet};
pub use places::{GeocodeResult, PlaceKind, PlaceOfInterest};
pub use prompt::{Prompt, PromptVariant};
