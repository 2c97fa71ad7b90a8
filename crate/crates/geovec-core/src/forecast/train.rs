use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::gradcheck::{batch_grads, Sample};
use super::model::{adapter_trace, forward_trace};
use super::params::{AdapterParams, ForecasterParams, NodeEmbeddingTable, ParamTensors};
use super::{ForecastConfig, ForecastError};
use crate::embed::GeoRepresentation;
use crate::hash::derive_seed;
use crate::series::{chronological_split, TimeSeriesDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub val_mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastMetrics {
    pub mse: f64,
    pub mae: f64,
}

/// A forecaster with its optional geolocation adapter, at the epoch with the
/// lowest validation loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForecaster {
    pub config: ForecastConfig,
    pub params: ForecasterParams,
    pub adapter: Option<AdapterParams>,
    pub loss_history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

impl TrainedForecaster {
    /// Hash over every forecaster and adapter parameter.
    pub fn param_hash(&self) -> u64 {
        let mut h = self.params.param_hash();
        if let Some(a) = &self.adapter {
            h ^= a.param_hash().rotate_left(1);
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNodeTable {
    pub config: ForecastConfig,
    pub params: ForecasterParams,
    pub table: NodeEmbeddingTable,
    pub loss_history: Vec<EpochLoss>,
    pub best_epoch: usize,
}

/// Chronological train/val/test split where each part holds at least one
/// window.
pub fn split_for(
    ds: &TimeSeriesDataset,
    config: &ForecastConfig,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset, TimeSeriesDataset), ForecastError> {
    Ok(chronological_split(ds, config.split, config.window())?)
}

fn require_windows(ds: &TimeSeriesDataset, config: &ForecastConfig) -> Result<(), ForecastError> {
    if ds.len() < config.window() {
        return Err(ForecastError::TooShort { len: ds.len(), needed: config.window() });
    }
    Ok(())
}

/// Per-node embeddings of `rep` in the order of `ids`.
fn aligned_embeddings(rep: &GeoRepresentation, ids: &[String]) -> Result<Vec<Vec<f64>>, ForecastError> {
    ids.iter()
        .map(|id| {
            rep.column_by_id(id)
                .map(|c| c.iter().map(|&v| f64::from(v)).collect())
                .ok_or_else(|| ForecastError::Misalignment(format!("no embedding for node `{id}`")))
        })
        .collect()
}

/// Sum of squared and absolute errors over every window of every node, with
/// `z_prime[i]` conditioning node `i`.
fn error_sums(
    params: &ForecasterParams,
    ds: &TimeSeriesDataset,
    z_prime: &[Vec<f64>],
    config: &ForecastConfig,
) -> (f64, f64, usize) {
    let (h, f) = (params.history, params.horizon);
    let windows = ds.window_count(h, f);
    let (mut se, mut ae) = (0.0, 0.0);
    for (i, zp) in z_prime.iter().enumerate() {
        for start in 0..windows {
            let window = ds.node_window(i, start, h);
            let trace = forward_trace(params, &window, zp, config.leaky_slope, config.epsilon_revin);
            for (k, yh) in trace.output.iter().enumerate() {
                let e = yh - ds.value(start + h + k, i);
                se += e * e;
                ae += e.abs();
            }
        }
    }
    (se, ae, windows * z_prime.len() * f)
}

fn metrics_for(
    params: &ForecasterParams,
    ds: &TimeSeriesDataset,
    z_prime: &[Vec<f64>],
    config: &ForecastConfig,
) -> ForecastMetrics {
    let (se, ae, count) = error_sums(params, ds, z_prime, config);
    ForecastMetrics { mse: se / count as f64, mae: ae / count as f64 }
}

fn adapted(adapter: Option<&AdapterParams>, embeddings: &[Vec<f64>], nodes: usize, slope: f64) -> Vec<Vec<f64>> {
    match adapter {
        Some(a) => embeddings.iter().map(|z| adapter_trace(z, a, slope).out).collect(),
        None => vec![Vec::new(); nodes],
    }
}

/// What feeds the conditioning slot during training.
enum Conditioning<'a> {
    None,
    Geo { embeddings: Vec<Vec<f64>>, adapter: &'a mut AdapterParams },
    Table(&'a mut NodeEmbeddingTable),
}

struct Outcome {
    history: Vec<EpochLoss>,
    best_epoch: usize,
}

/// Shared Adam loop over stride-1 windows of the train split. `params` and
/// the conditioning parameters are left at the best-validation epoch.
fn fit(
    train: &TimeSeriesDataset,
    val: &TimeSeriesDataset,
    config: &ForecastConfig,
    params: &mut ForecasterParams,
    mut cond: Conditioning<'_>,
) -> Result<Outcome, ForecastError> {
    let (h, f) = (config.history, config.horizon);
    let nodes = train.nodes();
    let windows = train.window_count(h, f);
    let mut index: Vec<(usize, usize)> = (0..nodes).flat_map(|i| (0..windows).map(move |s| (i, s))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "shuffle"));

    let shapes = |t: Vec<&[f64]>| t.iter().map(|x| x.len()).collect::<Vec<_>>();
    let mut opt_p = Adam::new(config.lr, &shapes(params.tensors()));
    let mut opt_c = match &cond {
        Conditioning::None => None,
        Conditioning::Geo { adapter, .. } => Some(Adam::new(config.lr, &shapes(adapter.tensors()))),
        Conditioning::Table(t) => Some(Adam::new(config.lr, &[t.table.len()])),
    };

    let mut best: Option<(f64, ForecasterParams, Vec<Vec<f64>>)> = None;
    let mut best_epoch = 0;
    let mut history = Vec::with_capacity(config.epochs);
    let mut last_finite = f64::NAN;

    for epoch in 0..config.epochs {
        index.shuffle(&mut rng);
        let (mut loss_sum, mut seen) = (0.0, 0usize);
        for (b, chunk) in index.chunks(config.batch).enumerate() {
            let batch: Vec<Sample> = chunk
                .iter()
                .map(|&(i, s)| Sample {
                    window: train.node_window(i, s, h),
                    target: train.node_window(i, s + h, f),
                    z: match &cond {
                        Conditioning::None => None,
                        Conditioning::Geo { embeddings, .. } => Some(embeddings[i].clone()),
                        Conditioning::Table(t) => Some(t.column(i).to_vec()),
                    },
                })
                .collect();
            let adapter_ref = match &cond {
                Conditioning::Geo { adapter, .. } => Some(&**adapter),
                _ => None,
            };
            let g = batch_grads(params, adapter_ref, &batch, config, 1.0)?;
            if !g.loss.is_finite() {
                return Err(ForecastError::NonFiniteLoss { epoch, batch: b, last_finite });
            }
            last_finite = g.loss;
            loss_sum += g.loss * chunk.len() as f64;
            seen += chunk.len();

            opt_p.update(params.tensors_mut(), g.params.tensors());
            match (&mut cond, opt_c.as_mut()) {
                (Conditioning::Geo { adapter, .. }, Some(opt)) => {
                    let ga = g.adapter.expect("adapter gradients");
                    opt.update(adapter.tensors_mut(), ga.tensors());
                }
                (Conditioning::Table(t), Some(opt)) => {
                    let mut gt = vec![0.0; t.table.len()];
                    for (&(i, _), dz) in chunk.iter().zip(&g.dz_prime) {
                        for (acc, d) in gt[i * t.d_s..(i + 1) * t.d_s].iter_mut().zip(dz) {
                            *acc += d;
                        }
                    }
                    opt.update(vec![&mut t.table[..]], vec![&gt[..]]);
                }
                _ => {}
            }
        }

        let cond_state: Vec<Vec<f64>> = match &cond {
            Conditioning::None => Vec::new(),
            Conditioning::Geo { adapter, .. } => adapter.tensors().iter().map(|t| t.to_vec()).collect(),
            Conditioning::Table(t) => vec![t.table.clone()],
        };
        let z_val: Vec<Vec<f64>> = match &cond {
            Conditioning::None => vec![Vec::new(); nodes],
            Conditioning::Geo { embeddings, adapter } => adapted(Some(adapter), embeddings, nodes, config.leaky_slope),
            Conditioning::Table(t) => (0..nodes).map(|i| t.column(i).to_vec()).collect(),
        };
        let val_mse = metrics_for(params, val, &z_val, config).mse;
        let train_mse = loss_sum / seen as f64;
        if !val_mse.is_finite() {
            return Err(ForecastError::NonFiniteLoss { epoch, batch: usize::MAX, last_finite });
        }
        history.push(EpochLoss { epoch, train_mse, val_mse });
        if best.as_ref().is_none_or(|(v, _, _)| val_mse < *v) {
            best = Some((val_mse, params.clone(), cond_state));
            best_epoch = epoch;
        }
    }

    let (_, best_params, best_cond) = best.expect("at least one epoch");
    *params = best_params;
    match &mut cond {
        Conditioning::None => {}
        Conditioning::Geo { adapter, .. } => {
            for (dst, src) in adapter.tensors_mut().into_iter().zip(&best_cond) {
                dst.copy_from_slice(src);
            }
        }
        Conditioning::Table(t) => t.table.copy_from_slice(&best_cond[0]),
    }
    Ok(Outcome { history, best_epoch })
}

fn prepare(
    ds: &TimeSeriesDataset,
    config: &ForecastConfig,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset), ForecastError> {
    config.validate()?;
    let (train, val, _) = split_for(ds, config)?;
    Ok((train, val))
}

/// Trains on the train split of `ds`, selecting the epoch by validation MSE.
/// With `rep`, each node's embedding goes through a jointly trained adapter
/// into the conditioning slot; without it the model is the plain forecaster.
pub fn train_forecaster(
    ds: &TimeSeriesDataset,
    rep: Option<&GeoRepresentation>,
    config: &ForecastConfig,
) -> Result<TrainedForecaster, ForecastError> {
    let (train, val) = prepare(ds, config)?;
    let conditioned = rep.is_some();
    let d_t = config.temporal_width(conditioned);
    let d_s = if conditioned { config.d_s } else { 0 };
    let mut params = ForecasterParams::init(
        config.history,
        config.horizon,
        d_t,
        d_s,
        config.hidden,
        derive_seed(config.seed, "init/forecaster"),
    );
    let mut adapter = None;
    let outcome = match rep {
        Some(rep) => {
            let embeddings = aligned_embeddings(rep, ds.node_ids())?;
            let mut a = AdapterParams::init(rep.dim(), d_s, derive_seed(config.seed, "init/adapter"));
            let out = fit(&train, &val, config, &mut params, Conditioning::Geo { embeddings, adapter: &mut a })?;
            adapter = Some(a);
            out
        }
        None => fit(&train, &val, config, &mut params, Conditioning::None)?,
    };
    Ok(TrainedForecaster {
        config: config.clone(),
        params,
        adapter,
        loss_history: outcome.history,
        best_epoch: outcome.best_epoch,
    })
}

/// Baseline with a learnable conditioning vector per training node.
pub fn train_with_node_table(ds: &TimeSeriesDataset, config: &ForecastConfig) -> Result<TrainedNodeTable, ForecastError> {
    let (train, val) = prepare(ds, config)?;
    let d_t = config.temporal_width(true);
    let mut params = ForecasterParams::init(
        config.history,
        config.horizon,
        d_t,
        config.d_s,
        config.hidden,
        derive_seed(config.seed, "init/forecaster"),
    );
    let mut table = NodeEmbeddingTable::init(ds.node_ids().to_vec(), config.d_s, derive_seed(config.seed, "init/table"));
    let outcome = fit(&train, &val, config, &mut params, Conditioning::Table(&mut table))?;
    table.refresh_fallback();
    Ok(TrainedNodeTable {
        config: config.clone(),
        params,
        table,
        loss_history: outcome.history,
        best_epoch: outcome.best_epoch,
    })
}

/// MSE and MAE in original units over every window and node of `split`.
pub fn evaluate_forecaster(
    model: &TrainedForecaster,
    split: &TimeSeriesDataset,
    rep: Option<&GeoRepresentation>,
) -> Result<ForecastMetrics, ForecastError> {
    let config = &model.config;
    require_windows(split, config)?;
    let z_prime = match (&model.adapter, rep) {
        (Some(a), Some(rep)) => {
            let emb = aligned_embeddings(rep, split.node_ids())?;
            if rep.dim() != a.input_dim {
                return Err(ForecastError::DimMismatch { what: "embedding", expected: a.input_dim, got: rep.dim() });
            }
            adapted(Some(a), &emb, split.nodes(), config.leaky_slope)
        }
        (Some(_), None) => {
            return Err(ForecastError::Misalignment(String::from("model expects a geolocation representation")))
        }
        (None, _) => vec![Vec::new(); split.nodes()],
    };
    Ok(metrics_for(&model.params, split, &z_prime, config))
}

/// Forward-only evaluation on nodes the model never saw, through the frozen
/// adapter and each node's own embedding.
pub fn zero_shot_eval(
    model: &TrainedForecaster,
    target: &TimeSeriesDataset,
    target_rep: &GeoRepresentation,
) -> Result<ForecastMetrics, ForecastError> {
    if model.adapter.is_none() {
        return Err(ForecastError::NoAdapter);
    }
    evaluate_forecaster(model, target, Some(target_rep))
}

/// Node-table counterpart of [`evaluate_forecaster`]; nodes missing from the
/// table use its fallback column.
pub fn evaluate_node_table(model: &TrainedNodeTable, split: &TimeSeriesDataset) -> Result<ForecastMetrics, ForecastError> {
    require_windows(split, &model.config)?;
    let z_prime: Vec<Vec<f64>> = split.node_ids().iter().map(|id| model.table.lookup(id).to_vec()).collect();
    Ok(metrics_for(&model.params, split, &z_prime, &model.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::forecaster_forward;
    use crate::prompt::PromptVariant;
    use rand_distr::{Distribution, Normal};

    fn noise_ds(t: usize, n: usize, seed: u64) -> TimeSeriesDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        TimeSeriesDataset::new(
            (0..n).map(|i| format!("n{i}")).collect(),
            (0..t as i64).collect(),
            (0..t * n).map(|_| normal.sample(&mut rng)).collect(),
        )
        .unwrap()
    }

    fn small_config() -> ForecastConfig {
        ForecastConfig { history: 8, horizon: 4, d_t: 8, d_s: 4, hidden: 16, epochs: 3, batch: 32, ..Default::default() }
    }

    fn rep_for(ds: &TimeSeriesDataset, dim: usize) -> GeoRepresentation {
        let data = (0..ds.nodes() * dim).map(|k| ((k * 37 % 11) as f32) / 11.0 - 0.5).collect();
        GeoRepresentation::from_columns(ds.node_ids().to_vec(), dim, data, "test".into(), PromptVariant::default(), 0)
            .unwrap()
    }

    #[test]
    fn deterministic_replay() {
        let ds = noise_ds(200, 3, 1);
        let rep = rep_for(&ds, 5);
        let a = train_forecaster(&ds, Some(&rep), &small_config()).unwrap();
        let b = train_forecaster(&ds, Some(&rep), &small_config()).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.loss_history.iter().zip(&b.loss_history) {
            assert_eq!(x.train_mse.to_bits(), y.train_mse.to_bits());
            assert_eq!(x.val_mse.to_bits(), y.val_mse.to_bits());
        }
        assert_eq!(a.loss_history.len(), 3);
    }

    #[test]
    fn zero_width_conditioning_is_plain_model() {
        let ds = noise_ds(200, 2, 2);
        let rep = rep_for(&ds, 5);
        let cfg = ForecastConfig { d_s: 0, ..small_config() };
        let geo = train_forecaster(&ds, Some(&rep), &cfg).unwrap();
        let plain = train_forecaster(&ds, None, &cfg).unwrap();
        assert_eq!(geo.params, plain.params);
        assert_eq!(geo.loss_history, plain.loss_history);
    }

    #[test]
    fn evaluation_matches_scalar_loop() {
        let ds = noise_ds(60, 2, 3);
        let cfg = small_config();
        let model = TrainedForecaster {
            config: ForecastConfig { d_s: 0, ..cfg.clone() },
            params: ForecasterParams::init(8, 4, 8, 0, 16, 5),
            adapter: None,
            loss_history: Vec::new(),
            best_epoch: 0,
        };
        let m = evaluate_forecaster(&model, &ds, None).unwrap();
        let (mut se, mut ae, mut c) = (0.0, 0.0, 0.0);
        for i in 0..2 {
            for s in 0..=(60 - 12) {
                let w: Vec<f64> = (s..s + 8).map(|t| ds.value(t, i)).collect();
                let out = forecaster_forward(&w, &[], &model.params, &model.config).unwrap();
                for k in 0..4 {
                    let e = out[k] - ds.value(s + 8 + k, i);
                    se += e * e;
                    ae += e.abs();
                    c += 1.0;
                }
            }
        }
        assert!((m.mse - se / c).abs() < 1e-9);
        assert!((m.mae - ae / c).abs() < 1e-9);
    }

    fn last_value_model(history: usize, horizon: usize, slope: f64) -> ForecasterParams {
        let mut p = ForecasterParams::zeros(history, horizon, 2, 0, 2);
        p.embed_w[history - 1] = 1.0;
        p.embed_w[2 * history - 1] = -1.0;
        p.enc_w = vec![1.0, 0.0, 0.0, 1.0];
        for k in 0..horizon {
            p.dec_w[2 * k] = 1.0 / (1.0 + slope);
            p.dec_w[2 * k + 1] = -1.0 / (1.0 + slope);
        }
        p
    }

    #[test]
    fn perfect_memory_toy() {
        let cfg = ForecastConfig { history: 6, horizon: 3, d_t: 2, d_s: 0, hidden: 2, ..small_config() };
        let params = last_value_model(6, 3, cfg.leaky_slope);
        let mut s = 11u64;
        for _ in 0..50 {
            let w: Vec<f64> = (0..6).map(|_| (crate::hash::splitmix64(&mut s) % 1000) as f64 / 7.0 - 60.0).collect();
            let out = forecaster_forward(&w, &[], &params, &cfg).unwrap();
            assert!(out.iter().all(|o| (o - w[5]).abs() < 1e-9), "{out:?} vs {}", w[5]);
        }
        let levels = [3.0, -1.5, 40.0];
        let ds = TimeSeriesDataset::new(
            vec!["a".into(), "b".into(), "c".into()],
            (0..30).collect(),
            (0..90).map(|k| levels[k % 3]).collect(),
        )
        .unwrap();
        let model = TrainedForecaster { config: cfg, params, adapter: None, loss_history: Vec::new(), best_epoch: 0 };
        let m = evaluate_forecaster(&model, &ds, None).unwrap();
        assert!(m.mse < 1e-20 && m.mae < 1e-9, "{m:?}");
    }

    #[test]
    fn constant_predictor_on_unit_noise() {
        // zero parameters predict the window mean, whose error variance is
        // 1 + 1/H for i.i.d. unit noise
        let ds = noise_ds(2000, 8, 4);
        let cfg = ForecastConfig { d_s: 0, history: 400, horizon: 1, ..small_config() };
        let model = TrainedForecaster {
            config: cfg.clone(),
            params: ForecasterParams::zeros(400, 1, 8, 0, 16),
            adapter: None,
            loss_history: Vec::new(),
            best_epoch: 0,
        };
        let m = evaluate_forecaster(&model, &ds, None).unwrap();
        assert!((m.mse - 1.0).abs() < 0.05, "{}", m.mse);
    }

    #[test]
    fn too_short_and_misaligned() {
        let ds = noise_ds(10, 2, 5);
        assert!(matches!(train_forecaster(&ds, None, &small_config()), Err(ForecastError::Series(_))));
        let ds = noise_ds(200, 2, 5);
        let other = noise_ds(200, 3, 5);
        let rep = rep_for(&ds, 4);
        assert!(matches!(
            train_forecaster(&other, Some(&rep), &small_config()),
            Err(ForecastError::Misalignment(_))
        ));
        let model = train_forecaster(&ds, None, &small_config()).unwrap();
        assert!(matches!(evaluate_forecaster(&model, &noise_ds(5, 2, 1), None), Err(ForecastError::TooShort { .. })));
        assert_eq!(zero_shot_eval(&model, &ds, &rep), Err(ForecastError::NoAdapter));
    }

    #[test]
    fn exploding_lr_reports_non_finite_loss() {
        let ds = noise_ds(200, 2, 6);
        let mut ds_big = ds.values().to_vec();
        ds_big.iter_mut().for_each(|v| *v *= 1e200);
        let ds = TimeSeriesDataset::new(ds.node_ids().to_vec(), ds.timestamps().to_vec(), ds_big).unwrap();
        let r = train_forecaster(&ds, None, &ForecastConfig { d_s: 0, ..small_config() });
        assert!(matches!(r, Err(ForecastError::NonFiniteLoss { epoch: 0, batch: 0, .. })), "{r:?}");
    }

    #[test]
    fn node_table_fallback_for_unseen_nodes() {
        let ds = noise_ds(200, 3, 7);
        let model = train_with_node_table(&ds, &small_config()).unwrap();
        let mean: Vec<f64> = (0..4).map(|r| (0..3).map(|j| model.table.column(j)[r]).sum::<f64>() / 3.0).collect();
        for (a, b) in model.table.fallback.iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12);
        }
        let unseen = TimeSeriesDataset::new(vec!["x".into(), "y".into()], (0..50).collect(), vec![0.5; 100]).unwrap();
        let m = evaluate_node_table(&model, &unseen).unwrap();
        assert!(m.mse.is_finite());
    }

    #[test]
    fn zero_shot_on_source_equals_evaluate() {
        let ds = noise_ds(200, 3, 8);
        let rep = rep_for(&ds, 6);
        let model = train_forecaster(&ds, Some(&rep), &small_config()).unwrap();
        let before = model.param_hash();
        let a = evaluate_forecaster(&model, &ds, Some(&rep)).unwrap();
        let b = zero_shot_eval(&model, &ds, &rep).unwrap();
        assert_eq!(a, b);
        assert_eq!(model.param_hash(), before);
    }
}
