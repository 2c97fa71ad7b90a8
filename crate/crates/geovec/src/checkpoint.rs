//! Forecast checkpoints and CSV reports.
//!
//! A checkpoint is one JSON document: a `header` with the configuration,
//! tensor names and lengths and the loss history, and `params`, the base64
//! encoding of every parameter as little-endian f64 in header order.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use geovec_core::forecast::{
    AdapterParams, EpochLoss, ForecastConfig, ForecastMetrics, ForecasterParams, NodeEmbeddingTable, ParamTensors,
    TrainedForecaster, TrainedNodeTable,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::store_io::write_atomic;

pub const FORMAT: &str = "geovec-forecast-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// A trained model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Forecaster(TrainedForecaster),
    NodeTable(TrainedNodeTable),
}

impl Model {
    pub fn config(&self) -> &ForecastConfig {
        match self {
            Model::Forecaster(m) => &m.config,
            Model::NodeTable(m) => &m.config,
        }
    }

    pub fn loss_history(&self) -> &[EpochLoss] {
        match self {
            Model::Forecaster(m) => &m.loss_history,
            Model::NodeTable(m) => &m.loss_history,
        }
    }

    /// `plain`, `geo` or `table`.
    pub fn label(&self) -> &'static str {
        match self {
            Model::Forecaster(m) if m.adapter.is_some() => "geo",
            Model::Forecaster(_) => "plain",
            Model::NodeTable(_) => "table",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Shapes {
    history: usize,
    horizon: usize,
    d_t: usize,
    d_s: usize,
    hidden: usize,
    adapter_input_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: String,
    config: ForecastConfig,
    seed: u64,
    shapes: Shapes,
    tensors: Vec<(String, usize)>,
    node_ids: Option<Vec<String>>,
    best_epoch: usize,
    loss_history: Vec<EpochLoss>,
}

#[derive(Debug, Serialize, Deserialize)]
struct File {
    header: Header,
    params: String,
}

const FORECASTER_NAMES: [&str; 6] = ["embed_w", "embed_b", "enc_w", "enc_b", "dec_w", "dec_b"];
const ADAPTER_NAMES: [&str; 4] = ["adapter_w1", "adapter_b1", "adapter_w2", "adapter_b2"];

fn named<'a>(names: &[&str], tensors: Vec<&'a [f64]>) -> Vec<(String, &'a [f64])> {
    names.iter().map(|s| s.to_string()).zip(tensors).collect()
}

/// Serializes a model to the checkpoint JSON text.
pub fn encode_checkpoint(model: &Model) -> String {
    let (params, kind, adapter_dim, node_ids, best_epoch) = match model {
        Model::Forecaster(m) => (&m.params, "forecaster", m.adapter.as_ref().map(|a| a.input_dim), None, m.best_epoch),
        Model::NodeTable(m) => (&m.params, "node_table", None, Some(m.table.node_ids.clone()), m.best_epoch),
    };
    let mut tensors = named(&FORECASTER_NAMES, params.tensors());
    match model {
        Model::Forecaster(m) => {
            if let Some(a) = &m.adapter {
                tensors.extend(named(&ADAPTER_NAMES, a.tensors()));
            }
        }
        Model::NodeTable(m) => {
            tensors.push(("table".into(), &m.table.table));
            tensors.push(("fallback".into(), &m.table.fallback));
        }
    }
    let mut blob = Vec::with_capacity(tensors.iter().map(|(_, t)| t.len() * 8).sum());
    for (_, t) in &tensors {
        for v in *t {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let config = model.config().clone();
    let header = Header {
        format: FORMAT.into(),
        version: FORMAT_VERSION,
        kind: kind.into(),
        seed: config.seed,
        shapes: Shapes {
            history: params.history,
            horizon: params.horizon,
            d_t: params.d_t,
            d_s: params.d_s,
            hidden: params.hidden,
            adapter_input_dim: adapter_dim,
        },
        config,
        tensors: tensors.iter().map(|(n, t)| (n.clone(), t.len())).collect(),
        node_ids,
        best_epoch,
        loss_history: model.loss_history().to_vec(),
    };
    let file = File { header, params: STANDARD.encode(blob) };
    serde_json::to_string_pretty(&file).expect("checkpoint serializes") + "\n"
}

fn malformed(m: impl Into<String>) -> CheckpointError {
    CheckpointError::Malformed(m.into())
}

fn fill(targets: Vec<&mut [f64]>, names: &[&str], header: &[(String, usize)], values: &mut impl Iterator<Item = f64>) -> Result<(), CheckpointError> {
    for (t, (want_name, (name, len))) in targets.into_iter().zip(names.iter().zip(header)) {
        if name != want_name || *len != t.len() {
            return Err(malformed(format!("tensor `{name}` ({len}) does not match `{want_name}` ({})", t.len())));
        }
        for slot in t.iter_mut() {
            *slot = values.next().ok_or_else(|| malformed("parameter blob too short"))?;
        }
    }
    Ok(())
}

pub fn decode_checkpoint(text: &str) -> Result<Model, CheckpointError> {
    let file: File = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let h = file.header;
    if h.format != FORMAT || h.version != FORMAT_VERSION {
        return Err(malformed(format!("unsupported format {} v{}", h.format, h.version)));
    }
    let blob = STANDARD.decode(file.params.trim()).map_err(|e| malformed(format!("params: {e}")))?;
    if blob.len() % 8 != 0 {
        return Err(malformed("parameter blob length is not a multiple of 8"));
    }
    let expected: usize = h.tensors.iter().map(|(_, n)| n).sum();
    if blob.len() / 8 != expected {
        return Err(malformed(format!("blob holds {} values, header lists {expected}", blob.len() / 8)));
    }
    let mut values = blob.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let s = &h.shapes;
    let mut params = ForecasterParams::zeros(s.history, s.horizon, s.d_t, s.d_s, s.hidden);
    let (head, rest) = h.tensors.split_at(FORECASTER_NAMES.len().min(h.tensors.len()));
    fill(params.tensors_mut(), &FORECASTER_NAMES, head, &mut values)?;
    match h.kind.as_str() {
        "forecaster" => {
            let adapter = match s.adapter_input_dim {
                Some(m) => {
                    let mut a = AdapterParams::zeros(m, s.d_s);
                    if rest.len() != ADAPTER_NAMES.len() {
                        return Err(malformed("adapter tensors missing"));
                    }
                    fill(a.tensors_mut(), &ADAPTER_NAMES, rest, &mut values)?;
                    Some(a)
                }
                None => None,
            };
            Ok(Model::Forecaster(TrainedForecaster {
                config: h.config,
                params,
                adapter,
                loss_history: h.loss_history,
                best_epoch: h.best_epoch,
            }))
        }
        "node_table" => {
            let node_ids = h.node_ids.ok_or_else(|| malformed("node table without node ids"))?;
            let mut table = NodeEmbeddingTable {
                table: vec![0.0; s.d_s * node_ids.len()],
                fallback: vec![0.0; s.d_s],
                node_ids,
                d_s: s.d_s,
            };
            fill(vec![&mut table.table[..], &mut table.fallback[..]], &["table", "fallback"], rest, &mut values)?;
            Ok(Model::NodeTable(TrainedNodeTable {
                config: h.config,
                params,
                table,
                loss_history: h.loss_history,
                best_epoch: h.best_epoch,
            }))
        }
        other => Err(malformed(format!("unknown model kind `{other}`"))),
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CheckpointError {
    CheckpointError::Io { path: path.display().to_string(), message: e.to_string() }
}

pub fn save_checkpoint(model: &Model, path: &Path) -> Result<(), CheckpointError> {
    write_atomic(path, encode_checkpoint(model).as_bytes()).map_err(|e| io_err(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Model, CheckpointError> {
    decode_checkpoint(&fs::read_to_string(path).map_err(|e| io_err(path, e))?)
}

/// `epoch,train_mse,val_mse` rows.
pub fn loss_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_mse,val_mse\n");
    for e in history {
        out.push_str(&format!("{},{},{}\n", e.epoch, e.train_mse, e.val_mse));
    }
    out
}

/// One evaluation result as written to and read from metrics CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub model: String,
    pub split: String,
    pub mse: f64,
    pub mae: f64,
}

impl MetricsRow {
    pub fn new(model: &str, split: &str, m: ForecastMetrics) -> Self {
        MetricsRow { model: model.into(), split: split.into(), mse: m.mse, mae: m.mae }
    }
}

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, CheckpointError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    r.deserialize().collect::<Result<Vec<MetricsRow>, _>>().map_err(|e| io_err(path, e))
}

/// Percentage MSE improvement of `mse` over `baseline_mse`.
pub fn improvement_pct(baseline_mse: f64, mse: f64) -> f64 {
    100.0 * (baseline_mse - mse) / baseline_mse
}
