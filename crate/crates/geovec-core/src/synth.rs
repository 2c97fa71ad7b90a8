//! Seeded synthetic data for offline evaluation: a smooth geographic
//! attribute, coordinate-only representations, and node series whose shape
//! depends on location.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{cos, sin};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::embed::{rff_embed, EmbedError, GeoRepresentation};
use crate::geo::{Coordinate, NodeSet};
use crate::hash::derive_seed;
use crate::predict::AttributeVector;
use crate::prompt::PromptVariant;
use crate::series::TimeSeriesDataset;

/// `sin(lon / 15) + cos(lat / 10)`.
pub fn smooth_attribute(c: Coordinate) -> f64 {
    sin(c.lon() / 15.0) + cos(c.lat() / 10.0)
}

/// `n` nodes uniform over lon in [-180, 180), lat in [-60, 60), with the
/// smooth attribute plus Normal(0, `noise`).
pub fn gp_dataset(n: usize, noise: f64, seed: u64) -> (NodeSet, AttributeVector) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth/gp"));
    let normal = Normal::new(0.0, noise).expect("noise must be finite and non-negative");
    let mut ids = Vec::with_capacity(n);
    let mut coords = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let lon = rng.random_range(-180.0..180.0);
        let lat = rng.random_range(-60.0..60.0);
        let c = Coordinate::new(lon, lat).expect("in range");
        ids.push(format!("g{i:05}"));
        coords.push(c);
        values.push(smooth_attribute(c) + normal.sample(&mut rng));
    }
    let nodes = NodeSet::new(ids.clone(), coords).expect("unique ids");
    let attr = AttributeVector::new(String::from("synthetic"), ids, values).expect("finite");
    (nodes, attr)
}

/// Representation whose column for node `i` is `features(coords[i])`.
pub fn representation_from<F>(nodes: &NodeSet, dim: usize, provider_id: String, mut features: F) -> Result<GeoRepresentation, EmbedError>
where
    F: FnMut(Coordinate) -> Result<Vec<f64>, EmbedError>,
{
    let mut data = Vec::with_capacity(nodes.len() * dim);
    for &c in nodes.coords() {
        data.extend(features(c)?.into_iter().map(|v| v as f32));
    }
    GeoRepresentation::from_columns(nodes.ids().to_vec(), dim, data, provider_id, PromptVariant::InstructionOnly, 0)
}

/// Random Fourier features of each node's coordinate.
pub fn rff_representation(nodes: &NodeSet, dim: usize, seed: u64, lengthscale_deg: f64) -> Result<GeoRepresentation, EmbedError> {
    representation_from(nodes, dim, format!("rff-d{dim}-l{lengthscale_deg}-s{seed}"), |c| {
        rff_embed(c, dim, seed, lengthscale_deg)
    })
}

/// Two representations that each see one coordinate axis: the first embeds
/// `(lon, 0)`, the second `(0, lat)`. Against [`smooth_attribute`] each
/// carries one of its two terms.
pub fn half_signal_representations(
    nodes: &NodeSet,
    dim: usize,
    seed: u64,
    lengthscale_deg: f64,
) -> Result<(GeoRepresentation, GeoRepresentation), EmbedError> {
    let s1 = derive_seed(seed, "synth/half/lon");
    let s2 = derive_seed(seed, "synth/half/lat");
    let lon = representation_from(nodes, dim, format!("rff-lon-d{dim}"), |c| {
        rff_embed(Coordinate::new(c.lon(), 0.0).expect("in range"), dim, s1, lengthscale_deg)
    })?;
    let lat = representation_from(nodes, dim, format!("rff-lat-d{dim}"), |c| {
        rff_embed(Coordinate::new(0.0, c.lat()).expect("in range"), dim, s2, lengthscale_deg)
    })?;
    Ok((lon, lat))
}

/// Node grid and series shape of the geo-signal forecasting task.
#[derive(Debug, Clone, PartialEq)]
pub struct GeoSignalConfig {
    pub cols: usize,
    pub rows: usize,
    pub lon_range: (f64, f64),
    pub lat_range: (f64, f64),
    pub steps: usize,
    pub period: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for GeoSignalConfig {
    fn default() -> Self {
        GeoSignalConfig {
            cols: 8,
            rows: 5,
            lon_range: (0.0, 35.0),
            lat_range: (0.0, 20.0),
            steps: 480,
            period: 24.0,
            noise: 0.1,
            seed: 0,
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = if n > 1 { (hi - lo) / (n - 1) as f64 } else { 0.0 };
    (0..n).map(move |k| lo + step * k as f64)
}

impl GeoSignalConfig {
    /// The same grid shifted by half a cell in both axes, one fewer point
    /// per axis, so every node falls between source nodes.
    pub fn interleaved(&self) -> GeoSignalConfig {
        let dlon = (self.lon_range.1 - self.lon_range.0) / (self.cols.max(2) - 1) as f64;
        let dlat = (self.lat_range.1 - self.lat_range.0) / (self.rows.max(2) - 1) as f64;
        GeoSignalConfig {
            cols: self.cols - 1,
            rows: self.rows - 1,
            lon_range: (self.lon_range.0 + dlon / 2.0, self.lon_range.1 - dlon / 2.0),
            lat_range: (self.lat_range.0 + dlat / 2.0, self.lat_range.1 - dlat / 2.0),
            seed: derive_seed(self.seed, "synth/interleaved"),
            ..self.clone()
        }
    }

    pub fn nodes(&self, prefix: &str) -> NodeSet {
        let mut ids = Vec::new();
        let mut coords = Vec::new();
        for lat in linspace(self.lat_range.0, self.lat_range.1, self.rows) {
            for lon in linspace(self.lon_range.0, self.lon_range.1, self.cols) {
                ids.push(format!("{prefix}{:03}", ids.len()));
                coords.push(Coordinate::new(lon, lat).expect("grid in range"));
            }
        }
        NodeSet::new(ids, coords).expect("unique ids")
    }
}

/// Amplitude and level of a node's series.
pub fn geo_signal_shape(c: Coordinate) -> (f64, f64) {
    let s = 0.5 + 0.5 * sin(c.lon() / 7.0) * cos(c.lat() / 6.0);
    let level = cos(c.lon() / 9.0) + 0.5 * sin(c.lat() / 5.0);
    (s * s, level)
}

/// `a_i sin(2 pi t / period) + b_i + Normal(0, noise)` for every node, with
/// `(a_i, b_i)` from [`geo_signal_shape`]. Timestamps are hourly from 0.
pub fn geo_signal_series(nodes: &NodeSet, cfg: &GeoSignalConfig) -> TimeSeriesDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "synth/series"));
    let normal = Normal::new(0.0, cfg.noise).expect("noise must be finite and non-negative");
    let shapes: Vec<(f64, f64)> = nodes.coords().iter().map(|&c| geo_signal_shape(c)).collect();
    let mut values = Vec::with_capacity(cfg.steps * nodes.len());
    for t in 0..cfg.steps {
        let wave = sin(2.0 * PI * t as f64 / cfg.period);
        for &(a, b) in &shapes {
            values.push(a * wave + b + normal.sample(&mut rng));
        }
    }
    let timestamps = (0..cfg.steps as i64).map(|t| t * 3600).collect();
    TimeSeriesDataset::new(nodes.ids().to_vec(), timestamps, values).expect("finite, monotonic")
}

/// Source grid, its series, and the interleaved target region with its own
/// series.
pub fn transfer_task(cfg: &GeoSignalConfig) -> ((NodeSet, TimeSeriesDataset), (NodeSet, TimeSeriesDataset)) {
    let src = cfg.nodes("s");
    let src_ds = geo_signal_series(&src, cfg);
    let tcfg = cfg.interleaved();
    let tgt = tcfg.nodes("t");
    let tgt_ds = geo_signal_series(&tgt, &tcfg);
    ((src, src_ds), (tgt, tgt_ds))
}
