//! The `geovec` command line.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use geovec_core::embed::{EmbedError, EmbeddingProvider, GeoRepresentation, InstructionPrompts, MockProvider, PromptSource, RffProvider};
use geovec_core::forecast::{
    evaluate_forecaster, evaluate_node_table, split_for, train_forecaster, train_with_node_table, zero_shot_eval,
    ForecastConfig, ForecastError, ForecastMetrics,
};
use geovec_core::geo::build_adjacency;
use geovec_core::hash::hash64;
use geovec_core::predict::{concat_representations, holdout_eval, kfold_cv, AttributeVector, HoldoutSplit, PredictError, DEFAULT_ALPHA};
use geovec_core::raster::sample_raster;
use geovec_core::series::TimeSeriesDataset;
use geovec_core::synth::{gp_dataset, transfer_task, GeoSignalConfig};
use geovec_core::{Coordinate, NodeSet, PromptVariant};

use crate::checkpoint::{
    improvement_pct, load_checkpoint, loss_csv, metrics_csv, read_metrics_csv, save_checkpoint, MetricsRow, Model,
};
use crate::config::{ProviderKind, RunConfig};
use crate::dataio::{self, DataError};
use crate::osm::{DiskCache, Endpoints, FixtureSet, MapPrompts, OsmClient, RateLimiter, UreqTransport, DEFAULT_RADIUS_KM};
use crate::pipeline::build_geovec_parallel;
use crate::remote::RemoteProvider;
use crate::store_io::{load_store, save_store, write_atomic};

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;
pub const EXIT_GP: u8 = 4;
pub const EXIT_FORECAST: u8 = 5;

pub const DEFAULT_DIM: usize = 64;
pub const DEFAULT_LENGTHSCALE_DEG: f64 = 10.0;
pub const DEFAULT_WORKERS: usize = 4;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_MIN_DIST_KM: f64 = 0.1;

/// A failed command: message for stderr and the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(m: impl fmt::Display) -> Self {
        CliError { code: EXIT_INPUT, message: m.to_string() }
    }
    pub fn provider(m: impl fmt::Display) -> Self {
        CliError { code: EXIT_PROVIDER, message: m.to_string() }
    }
    pub fn gp(m: impl fmt::Display) -> Self {
        CliError { code: EXIT_GP, message: m.to_string() }
    }
    pub fn forecast(m: impl fmt::Display) -> Self {
        CliError { code: EXIT_FORECAST, message: m.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::input(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e)
    }
}

impl From<PredictError> for CliError {
    fn from(e: PredictError) -> Self {
        CliError::gp(e)
    }
}

impl From<ForecastError> for CliError {
    fn from(e: ForecastError) -> Self {
        CliError::forecast(e)
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::Prompt { .. } => CliError::input(e),
            _ => CliError::provider(e),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geovec", version, about = "Geolocation embeddings from map-grounded prompts")]
pub struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Never touch the network: map data comes from fixtures or the cache.
    #[arg(long, global = true)]
    pub offline: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the prompt for one node or coordinate.
    Prompt(PromptArgs),
    /// Embed every node and write an embedding store.
    Embed(EmbedArgs),
    /// Ridge regression from a store to a node attribute.
    Gp(GpArgs),
    /// Train and evaluate forecasters.
    #[command(subcommand)]
    Forecast(ForecastCommand),
    /// Inverse-distance adjacency matrix as CSV.
    Adjacency(AdjacencyArgs),
    /// Sample an ASCII grid at node coordinates.
    SampleRaster(RasterArgs),
    /// Write synthetic datasets.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Debug, Args, Default)]
pub struct MapArgs {
    /// JSON file of recorded map responses.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    #[arg(long)]
    pub radius_km: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long, requires = "nodes", conflicts_with_all = ["lat", "lon"])]
    pub node: Option<String>,
    #[arg(long, requires = "lon", allow_hyphen_values = true)]
    pub lat: Option<f64>,
    #[arg(long, requires = "lat", allow_hyphen_values = true)]
    pub lon: Option<f64>,
    #[arg(long)]
    pub variant: Option<String>,
    #[command(flatten)]
    pub map: MapArgs,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub provider: Option<ProviderKind>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub lengthscale: Option<f64>,
    #[arg(long, env = "GEOVEC_EMBED_URL")]
    pub remote_url: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub variant: Option<String>,
    /// Store path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[command(flatten)]
    pub map: MapArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GpMode {
    Cv,
    Holdout,
}

#[derive(Debug, Args)]
pub struct GpArgs {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Further stores concatenated with the first before fitting.
    #[arg(long)]
    pub concat: Vec<PathBuf>,
    #[arg(long)]
    pub attributes: Option<PathBuf>,
    #[arg(long, default_value = "value")]
    pub attribute_name: String,
    #[arg(long, value_enum, default_value_t = GpMode::Cv)]
    pub mode: GpMode,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct Hyper {
    #[arg(long)]
    pub history: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub d_t: Option<usize>,
    #[arg(long)]
    pub d_s: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub preserve_width: bool,
}

#[derive(Debug, Subcommand)]
pub enum ForecastCommand {
    Train(TrainArgs),
    Eval(EvalArgs),
    Zeroshot(EvalArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Condition on this embedding store through an adapter.
    #[arg(long, conflicts_with = "node_table")]
    pub store: Option<PathBuf>,
    /// Condition on a learnable per-node table instead.
    #[arg(long)]
    pub node_table: bool,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long)]
    pub store: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitName::Test)]
    pub split: SplitName,
    /// Metrics CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Baseline metrics CSV; prints the percentage MSE improvement over it.
    #[arg(long)]
    pub compare: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AdjacencyArgs {
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_DIST_KM)]
    pub min_dist_km: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RasterArgs {
    #[arg(long)]
    pub raster: PathBuf,
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Nodes and a smooth attribute (`nodes.csv`, `attributes.csv`).
    Gp {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Source and interleaved target grids with their series.
    GeoSignal {
        #[arg(long)]
        out_dir: PathBuf,
    },
}

struct Ctx {
    cfg: RunConfig,
    offline: bool,
    seed: Option<u64>,
}

impl Ctx {
    fn seed(&self, section: Option<u64>) -> u64 {
        self.seed.or(section).or(self.cfg.seed).unwrap_or(0)
    }

    fn path(&self, flag: Option<&PathBuf>, file: Option<&PathBuf>, what: &str) -> Result<PathBuf, CliError> {
        flag.or(file).cloned().ok_or_else(|| CliError::input(format!("missing --{what}")))
    }

    fn variant(&self, flag: Option<&str>) -> Result<PromptVariant, CliError> {
        match flag.or(self.cfg.variant.as_deref()) {
            Some(s) => s.parse().map_err(CliError::input),
            None => Ok(PromptVariant::default()),
        }
    }

    fn osm_client(&self, map: &MapArgs) -> Result<OsmClient, CliError> {
        let cache = match map.cache_dir.as_ref().or(self.cfg.paths.cache_dir.as_ref()) {
            Some(dir) => Some(DiskCache::open(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?),
            None => None,
        };
        match map.fixtures.as_ref().or(self.cfg.paths.fixtures.as_ref()) {
            Some(path) => Ok(OsmClient::fixtures(FixtureSet::load(path).map_err(CliError::input)?, cache)),
            None if self.offline => Ok(OsmClient::fixtures(FixtureSet::default(), cache)),
            None => Ok(OsmClient::live(
                Arc::new(UreqTransport::default()),
                Arc::new(RateLimiter::per_second()),
                Endpoints::from_env(),
                cache,
            )),
        }
    }

    fn radius(&self, map: &MapArgs) -> f64 {
        map.radius_km.or(self.cfg.radius_km).unwrap_or(DEFAULT_RADIUS_KM)
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(CliError::input)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { offline: cli.offline || cfg.offline, seed: cli.seed, cfg };
    match cli.command {
        Command::Prompt(a) => cmd_prompt(&ctx, a, out),
        Command::Embed(a) => cmd_embed(&ctx, a, out),
        Command::Gp(a) => cmd_gp(&ctx, a, out),
        Command::Forecast(ForecastCommand::Train(a)) => cmd_train(&ctx, a, out),
        Command::Forecast(ForecastCommand::Eval(a)) => cmd_eval(&ctx, a, false, out),
        Command::Forecast(ForecastCommand::Zeroshot(a)) => cmd_eval(&ctx, a, true, out),
        Command::Adjacency(a) => cmd_adjacency(&ctx, a, out),
        Command::SampleRaster(a) => cmd_sample_raster(&ctx, a, out),
        Command::Synth(s) => cmd_synth(&ctx, s, out),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn cmd_prompt(ctx: &Ctx, a: PromptArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let variant = ctx.variant(a.variant.as_deref())?;
    let coord = match (a.lat, a.lon, &a.node) {
        (Some(lat), Some(lon), _) => Coordinate::from_lat_lon(lat, lon).map_err(CliError::input)?,
        (_, _, Some(id)) => {
            let path = ctx.path(a.nodes.as_ref(), ctx.cfg.paths.nodes.as_ref(), "nodes")?;
            let nodes = dataio::load_nodes_csv(&path)?;
            let i = nodes.position(id).ok_or_else(|| CliError::input(format!("unknown node id `{id}`")))?;
            nodes.coords()[i]
        }
        _ => return Err(CliError::input("give --node with --nodes, or --lat and --lon")),
    };
    let prompt = if variant == PromptVariant::InstructionOnly {
        InstructionPrompts.prompt("", coord, variant)
    } else {
        let client = ctx.osm_client(&a.map)?;
        MapPrompts { client: &client, radius_km: ctx.radius(&a.map) }.build(coord, variant)
    }
    .map_err(CliError::input)?;
    emit(out, &prompt.text)?;
    emit(out, "\n")
}

fn cmd_embed(ctx: &Ctx, a: EmbedArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let pc = &ctx.cfg.provider;
    let nodes = dataio::load_nodes_csv(&ctx.path(a.nodes.as_ref(), ctx.cfg.paths.nodes.as_ref(), "nodes")?)?;
    let store = ctx.path(a.out.as_ref(), ctx.cfg.paths.store.as_ref(), "out")?;
    let variant = ctx.variant(a.variant.as_deref())?;
    let kind = a.provider.or(pc.kind).unwrap_or(ProviderKind::Mock);
    let dim = a.dim.or(pc.dim).unwrap_or(DEFAULT_DIM);
    let seed = ctx.seed(pc.seed);
    let workers = a.workers.or(pc.workers).unwrap_or(DEFAULT_WORKERS);
    let provider: Box<dyn EmbeddingProvider + Sync> = match kind {
        ProviderKind::Mock => Box::new(MockProvider::new(dim, seed).map_err(CliError::input)?),
        ProviderKind::Rff => {
            let ls = a.lengthscale.or(pc.lengthscale_deg).unwrap_or(DEFAULT_LENGTHSCALE_DEG);
            Box::new(RffProvider::new(dim, seed, ls).map_err(CliError::input)?)
        }
        ProviderKind::Remote => {
            if ctx.offline {
                return Err(CliError::provider("remote provider is unavailable in offline mode"));
            }
            let url = a.remote_url.or_else(|| pc.url.clone()).ok_or_else(|| CliError::input("missing --remote-url"))?;
            let model = a.model.or_else(|| pc.model.clone()).unwrap_or_else(|| "default".into());
            Box::new(RemoteProvider::new(url, model, dim))
        }
    };
    let rep = if variant == PromptVariant::InstructionOnly {
        build_geovec_parallel(&nodes, provider.as_ref(), variant, &InstructionPrompts, workers)?
    } else {
        let client = ctx.osm_client(&a.map)?;
        let source = MapPrompts { client: &client, radius_km: ctx.radius(&a.map) };
        build_geovec_parallel(&nodes, provider.as_ref(), variant, &source, workers)?
    };
    save_store(&rep, &store).map_err(CliError::input)?;
    emit(out, &format!("N={} M={} provider={}\n", rep.len(), rep.dim(), rep.provider_id))
}

fn load_rep(path: &Path) -> Result<GeoRepresentation, CliError> {
    load_store(path).map_err(CliError::input)
}

/// Ids ordered by `hash64(seed, id)`; the last `ceil(n * fraction)` form the
/// test set.
pub fn hash_split(ids: &[String], fraction: f64, seed: u64) -> Result<HoldoutSplit, CliError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CliError::input("--test-fraction must lie strictly between 0 and 1"));
    }
    let mut order: Vec<&String> = ids.iter().collect();
    order.sort_by_key(|id| (hash64(seed, id.as_bytes()), id.as_str()));
    let n_test = ((ids.len() as f64 * fraction).ceil() as usize).clamp(1, ids.len().saturating_sub(1).max(1));
    let cut = ids.len() - n_test;
    let train = order[..cut].iter().map(|s| s.to_string()).collect();
    let test = order[cut..].iter().map(|s| s.to_string()).collect();
    Ok(HoldoutSplit::new(train, test)?)
}

fn cmd_gp(ctx: &Ctx, a: GpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let gc = &ctx.cfg.gp;
    let mut rep = load_rep(&ctx.path(a.store.as_ref(), ctx.cfg.paths.store.as_ref(), "store")?)?;
    if !a.concat.is_empty() {
        let mut reps = vec![rep];
        for p in &a.concat {
            reps.push(load_rep(p)?);
        }
        rep = concat_representations(&reps)?;
    }
    let attr_path = ctx.path(a.attributes.as_ref(), ctx.cfg.paths.attributes.as_ref(), "attributes")?;
    let attr: AttributeVector = dataio::load_attribute_csv(&attr_path, &a.attribute_name)?;
    let alpha = a.alpha.or(gc.alpha).unwrap_or(DEFAULT_ALPHA);
    let seed = ctx.seed(gc.seed);
    let (report, summary) = match a.mode {
        GpMode::Cv => {
            let folds = a.folds.or(gc.folds).unwrap_or(DEFAULT_FOLDS);
            let r = kfold_cv(&rep, &attr, folds, alpha, seed)?;
            let summary = format!("cv folds={} n={} mean_r2={:.4} mean_rmse={:.4} mean_mae={:.4}\n", r.folds, r.n, r.mean_r2, r.mean_rmse, r.mean_mae);
            (serde_json::to_value(&r).expect("serializable"), summary)
        }
        GpMode::Holdout => {
            let split = hash_split(&attr.node_ids, a.test_fraction, seed)?;
            let m = holdout_eval(&rep, &attr, &split, alpha)?;
            let report = json!({
                "mode": "holdout",
                "attribute": attr.name,
                "provider_id": rep.provider_id,
                "dim": rep.dim(),
                "alpha": alpha,
                "seed": seed,
                "n_train": split.train().len(),
                "n_test": split.test().len(),
                "mae": m.mae,
                "rmse": m.rmse,
                "r2": m.r2,
            });
            let summary = format!("holdout n_train={} n_test={} r2={:.4} rmse={:.4} mae={:.4}\n", split.train().len(), split.test().len(), m.r2, m.rmse, m.mae);
            (report, summary)
        }
    };
    let text = serde_json::to_string_pretty(&report).expect("serializable") + "\n";
    match &a.out {
        Some(p) => {
            write_atomic(p, text.as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            emit(out, &summary)
        }
        None => emit(out, &text),
    }
}

fn forecast_config(ctx: &Ctx, h: &Hyper) -> Result<ForecastConfig, CliError> {
    let f = &ctx.cfg.forecast;
    let d = ForecastConfig::default();
    let c = ForecastConfig {
        history: h.history.or(f.history).unwrap_or(d.history),
        horizon: h.horizon.or(f.horizon).unwrap_or(d.horizon),
        d_t: h.d_t.or(f.d_t).unwrap_or(d.d_t),
        d_s: h.d_s.or(f.d_s).unwrap_or(d.d_s),
        hidden: h.hidden.or(f.hidden).unwrap_or(d.hidden),
        lr: h.lr.or(f.lr).unwrap_or(d.lr),
        epochs: h.epochs.or(f.epochs).unwrap_or(d.epochs),
        batch: h.batch.or(f.batch).unwrap_or(d.batch),
        seed: ctx.seed(f.seed),
        leaky_slope: f.leaky_slope.unwrap_or(d.leaky_slope),
        epsilon_revin: f.epsilon_revin.unwrap_or(d.epsilon_revin),
        preserve_width: h.preserve_width || f.preserve_width.unwrap_or(d.preserve_width),
        split: d.split,
    };
    c.validate()?;
    Ok(c)
}

fn load_series(ctx: &Ctx, flag: Option<&PathBuf>) -> Result<TimeSeriesDataset, CliError> {
    Ok(dataio::load_timeseries_csv(&ctx.path(flag, ctx.cfg.paths.timeseries.as_ref(), "series")?)?)
}

fn cmd_train(ctx: &Ctx, a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let config = forecast_config(ctx, &a.hyper)?;
    let ds = load_series(ctx, a.series.as_ref())?;
    let model = if a.node_table {
        Model::NodeTable(train_with_node_table(&ds, &config)?)
    } else {
        let rep = a.store.as_deref().map(load_rep).transpose()?;
        Model::Forecaster(train_forecaster(&ds, rep.as_ref(), &config)?)
    };
    save_checkpoint(&model, &a.checkpoint).map_err(CliError::input)?;
    if let Some(p) = &a.loss_csv {
        write_atomic(p, loss_csv(model.loss_history()).as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
    }
    let best = model.loss_history().iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
    emit(out, &format!("trained model={} epochs={} best_val_mse={best:.6}\n", model.label(), model.loss_history().len()))
}

fn cmd_eval(ctx: &Ctx, a: EvalArgs, zeroshot: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let model = load_checkpoint(&a.checkpoint).map_err(CliError::input)?;
    let ds = load_series(ctx, a.series.as_ref())?;
    let rep = a.store.as_deref().map(load_rep).transpose()?;
    let (train, val, test) = split_for(&ds, model.config())?;
    let (split_name, part) = match a.split {
        SplitName::Train => ("train", train),
        SplitName::Val => ("val", val),
        SplitName::Test => ("test", test),
    };
    let metrics: ForecastMetrics = match &model {
        Model::Forecaster(f) if f.adapter.is_some() => {
            let rep = rep.as_ref().ok_or_else(|| CliError::input("model is conditioned on embeddings; pass --store"))?;
            if zeroshot {
                zero_shot_eval(f, &part, rep)?
            } else {
                evaluate_forecaster(f, &part, Some(rep))?
            }
        }
        Model::Forecaster(f) => evaluate_forecaster(f, &part, None)?,
        Model::NodeTable(t) => evaluate_node_table(t, &part)?,
    };
    let split_name = if zeroshot { format!("zeroshot-{split_name}") } else { split_name.to_string() };
    let row = MetricsRow::new(model.label(), &split_name, metrics);
    if let Some(p) = &a.out {
        write_atomic(p, metrics_csv(std::slice::from_ref(&row)).as_bytes()).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
    }
    emit(out, &format!("model={} split={} mse={:.6} mae={:.6}\n", row.model, row.split, row.mse, row.mae))?;
    if let Some(p) = &a.compare {
        let rows = read_metrics_csv(p).map_err(CliError::input)?;
        let base = rows
            .iter()
            .find(|r| r.split == row.split)
            .or(rows.first())
            .ok_or_else(|| CliError::input(format!("{}: no metrics rows", p.display())))?;
        emit(out, &format!("IMP {:.2}% (baseline model={} mse={:.6})\n", improvement_pct(base.mse, row.mse), base.model, base.mse))?;
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::input(e)
}

fn finish_csv(w: csv::Writer<Vec<u8>>, path: Option<&PathBuf>, out: &mut dyn Write) -> Result<(), CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::input(e.error()))?;
    match path {
        Some(p) => write_atomic(p, &bytes).map_err(|e| CliError::input(format!("{}: {e}", p.display()))),
        None => Ok(out.write_all(&bytes)?),
    }
}

fn cmd_adjacency(ctx: &Ctx, a: AdjacencyArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if !(a.min_dist_km.is_finite() && a.min_dist_km > 0.0) {
        return Err(CliError::input("--min-dist-km must be positive"));
    }
    let nodes = dataio::load_nodes_csv(&ctx.path(a.nodes.as_ref(), ctx.cfg.paths.nodes.as_ref(), "nodes")?)?;
    let adj = build_adjacency(&nodes, a.min_dist_km);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend(nodes.ids().iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (i, id) in nodes.ids().iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(adj.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish_csv(w, a.out.as_ref(), out)
}

fn cmd_sample_raster(ctx: &Ctx, a: RasterArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let grid = dataio::load_raster(&a.raster)?;
    let nodes = dataio::load_nodes_csv(&ctx.path(a.nodes.as_ref(), ctx.cfg.paths.nodes.as_ref(), "nodes")?)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "value"]).map_err(csv_err)?;
    for (id, c) in nodes.iter() {
        let v = sample_raster(&grid, c).map_err(|e| CliError::input(format!("node `{id}`: {e}")))?;
        w.write_record([id, &v.to_string()]).map_err(csv_err)?;
    }
    finish_csv(w, a.out.as_ref(), out)
}

fn cmd_synth(ctx: &Ctx, s: SynthCommand, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = ctx.seed(None);
    match s {
        SynthCommand::Gp { n, noise, out_dir } => {
            if !(noise.is_finite() && noise >= 0.0) {
                return Err(CliError::input("--noise must be non-negative"));
            }
            std::fs::create_dir_all(&out_dir)?;
            let (nodes, attr) = gp_dataset(n, noise, seed);
            dataio::write_nodes_csv(&out_dir.join("nodes.csv"), &nodes)?;
            dataio::write_attribute_csv(&out_dir.join("attributes.csv"), &attr)?;
            emit(out, &format!("wrote {n} nodes to {}\n", out_dir.display()))
        }
        SynthCommand::GeoSignal { out_dir } => {
            std::fs::create_dir_all(&out_dir)?;
            let cfg = GeoSignalConfig { seed, ..Default::default() };
            let ((src, src_ds), (tgt, tgt_ds)) = transfer_task(&cfg);
            write_region(&out_dir, "source", &src, &src_ds)?;
            write_region(&out_dir, "target", &tgt, &tgt_ds)?;
            emit(out, &format!("wrote {} source and {} target nodes to {}\n", src.len(), tgt.len(), out_dir.display()))
        }
    }
}

fn write_region(dir: &Path, name: &str, nodes: &NodeSet, ds: &TimeSeriesDataset) -> Result<(), CliError> {
    dataio::write_nodes_csv(&dir.join(format!("{name}_nodes.csv")), nodes)?;
    dataio::write_timeseries_csv(&dir.join(format!("{name}_series.csv")), ds)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        Cli::try_parse_from(["geovec", "prompt", "--lat", "-33.9", "--lon", "151.2", "--variant", "instruction-only"]).unwrap();
        Cli::try_parse_from(["geovec", "--offline", "forecast", "train", "--series", "s.csv", "--checkpoint", "c.json", "--epochs", "3"]).unwrap();
        assert!(Cli::try_parse_from(["geovec", "prompt", "--lat", "1"]).is_err());
        assert!(Cli::try_parse_from(["geovec", "forecast", "train", "--store", "a", "--node-table", "--checkpoint", "c"]).is_err());
    }

    #[test]
    fn exit_codes_by_error_kind() {
        assert_eq!(CliError::from(PredictError::Misalignment("x".into())).code, EXIT_GP);
        assert_eq!(CliError::from(ForecastError::TooShort { len: 1, needed: 2 }).code, EXIT_FORECAST);
        assert_eq!(CliError::from(EmbedError::ProviderUnavailable("down".into())).code, EXIT_PROVIDER);
        let prompt = EmbedError::Prompt { id: "a".into(), source: "no address".into() };
        assert_eq!(CliError::from(prompt).code, EXIT_INPUT);
    }

    #[test]
    fn hash_split_is_seeded_and_disjoint() {
        let ids: Vec<String> = (0..100).map(|i| format!("n{i}")).collect();
        let a = hash_split(&ids, 0.2, 1).unwrap();
        assert_eq!((a.train().len(), a.test().len()), (80, 20));
        assert_eq!(a, hash_split(&ids, 0.2, 1).unwrap());
        assert_ne!(a.test(), hash_split(&ids, 0.2, 2).unwrap().test());
        assert!(a.test().iter().all(|t| !a.train().contains(t)));
        assert!(hash_split(&ids, 1.0, 1).is_err());
    }
}
