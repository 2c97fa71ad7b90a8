//! Files, HTTP and the command line around [`geovec_core`]: OpenStreetMap
//! clients with caching and rate limiting, a remote embedding provider,
//! CSV and raster loaders, store and checkpoint files, and the `geovec`
//! binary.

#![deny(rust_2018_idioms)]

pub use geovec_core as core;

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataio;
pub mod osm;
pub mod pipeline;
pub mod remote;
pub mod store_io;
