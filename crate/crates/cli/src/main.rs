//! Command-line front end for the localization pipeline.
//!
//! Eight subcommands cover the full workflow: simulate a building and
//! radio traces, synthesize floor-classifier training data, train the
//! classifier, calibrate the rank-distance and fix-quality models, replay
//! traces through the localization engine, and score the results.
//!
//! Conventions shared by every command:
//! - file outputs are deterministic given `--seed`; stderr carries logs
//!   and the run-config echo, stdout only machine-parsable results
//! - exit 0 on success, 2 on schema/input errors, 3 on runtime failures,
//!   with a single-line `error[class]: message` on stderr

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wifiloc_core::floor::DEFAULT_RANGE_WIDTH;
use wifiloc_core::formats::{
    self, dataset_from_set, read_json, FixRecord, FloorModelFile, TraceData,
};
use wifiloc_core::geo::haversine_distance;
use wifiloc_core::loc2d::{
    fit_rank_model, DEFAULT_FLOOR_ATTENUATION_DB, DEFAULT_GRID_RESOLUTION_M,
    DEFAULT_PEAK_THRESHOLD,
};
use wifiloc_core::metrics::{compute_metrics, write_cdf_csv, write_metrics};
use wifiloc_core::nn::{Mlp, TrainConfig};
use wifiloc_core::pipeline::{
    locate_trace, LocateConfig, DEFAULT_FLOOR_WINDOW_SECS, DEFAULT_LOC_WINDOW_SECS,
};
use wifiloc_core::refine::{fit_quality_model, QualityFeatures, DEFAULT_WINDOW_SECS};
use wifiloc_core::sim::{
    generate_building, generate_trace, rank_training_samples, BuildingSpec, PropagationParams,
    Trajectory,
};
use wifiloc_core::synth::{synthesize_training_set, SynthConfig};
use wifiloc_core::{Error, Result};

#[derive(Parser)]
#[command(name = "wifiloc", version, about = "WiFi pseudo-3D indoor localization toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic building, walk traces, and calibration samples.
    Simulate(SimulateArgs),
    /// Synthesize a labeled floor-classification dataset from a building.
    SynthTrain(SynthTrainArgs),
    /// Train the floor classifier on a synthesized dataset.
    TrainFloor(TrainFloorArgs),
    /// Fit the rank-to-distance model from calibration samples.
    FitRank(FitRankArgs),
    /// Fit the fix-quality regression from a trace with ground truth.
    FitQuality(FitQualityArgs),
    /// Replay a trace through the localization engine, emitting fixes.
    Locate(LocateArgs),
    /// Score fixes against the ground truth embedded in a trace.
    Evaluate(EvaluateArgs),
    /// Verify classifier gradients against finite differences.
    GradCheck(GradCheckArgs),
}

/// Propagation overrides shared by the simulation-backed commands. Fields
/// left unset fall back to the command's baseline (shadowing defaults to
/// 4 dB for `simulate`, 0 dB for `synth-train`).
#[derive(Args, Debug, Clone, Copy)]
struct PropagationArgs {
    /// Reference power at 1 m, dBm.
    #[arg(long, value_name = "DBM")]
    p0: Option<f64>,
    /// Path-loss exponent.
    #[arg(long, value_name = "EXP")]
    path_loss_exp: Option<f64>,
    /// Attenuation per floor of separation, dB.
    #[arg(long, value_name = "DB")]
    floor_loss: Option<f64>,
    /// Loss per crossed interior wall, dB.
    #[arg(long, value_name = "DB")]
    wall_loss: Option<f64>,
    /// Shadow-fading standard deviation, dB.
    #[arg(long, value_name = "DB")]
    sigma_sh: Option<f64>,
    /// Detection threshold, dBm.
    #[arg(long, value_name = "DBM")]
    vis_threshold: Option<f64>,
    /// Detection-probability rolloff width around the threshold, dB.
    #[arg(long, value_name = "DB")]
    rolloff: Option<f64>,
}

impl PropagationArgs {
    fn apply(&self, mut base: PropagationParams) -> PropagationParams {
        if let Some(v) = self.p0 {
            base.p0 = v;
        }
        if let Some(v) = self.path_loss_exp {
            base.n = v;
        }
        if let Some(v) = self.floor_loss {
            base.floor_loss = v;
        }
        if let Some(v) = self.wall_loss {
            base.wall_loss = v;
        }
        if let Some(v) = self.sigma_sh {
            base.sigma_sh = v;
        }
        if let Some(v) = self.vis_threshold {
            base.threshold = v;
        }
        if let Some(v) = self.rolloff {
            base.rolloff = v;
        }
        base
    }
}

/// Engine knobs shared by `locate` and `fit-quality`. Every flag can also
/// be set through its `WIFILOC_*` environment variable.
#[derive(Args, Debug, Clone)]
struct EngineArgs {
    /// Floor-profile window, seconds.
    #[arg(long, default_value_t = DEFAULT_FLOOR_WINDOW_SECS, env = "WIFILOC_NF")]
    nf: f64,
    /// 2D-profile window, seconds.
    #[arg(long, default_value_t = DEFAULT_LOC_WINDOW_SECS, env = "WIFILOC_NL")]
    nl: f64,
    /// Floor-attenuation compensation per floor of separation, dB.
    #[arg(long, default_value_t = DEFAULT_FLOOR_ATTENUATION_DB, env = "WIFILOC_WF")]
    wf: f64,
    /// Near-peak threshold on the normalized location PDF.
    #[arg(long, default_value_t = DEFAULT_PEAK_THRESHOLD, env = "WIFILOC_LTHR")]
    lthr: f64,
    /// Trailing fix window feeding the Kalman stage, seconds.
    #[arg(long, default_value_t = DEFAULT_WINDOW_SECS, env = "WIFILOC_WK")]
    wk: f64,
    /// Location-grid resolution, meters.
    #[arg(long, default_value_t = DEFAULT_GRID_RESOLUTION_M, env = "WIFILOC_GRID")]
    grid: f64,
    /// Skip floor-attenuation compensation of cross-floor readings.
    #[arg(long)]
    no_faf: bool,
    /// Skip the Kalman refinement stage; report raw fixes.
    #[arg(long)]
    no_kf: bool,
    /// Emit floor estimates only, skipping 2D work.
    #[arg(long)]
    floors_only: bool,
}

impl EngineArgs {
    /// The search-range width is dictated by the trained floor model, not a
    /// flag: the classifier head has exactly one output per in-range floor.
    fn to_config(&self, range_width: u32) -> LocateConfig {
        LocateConfig {
            floor_window_secs: self.nf,
            loc_window_secs: self.nl,
            faf_db: self.wf,
            peak_threshold: self.lthr,
            track_window_secs: self.wk,
            grid_resolution_m: self.grid,
            range_width,
            use_faf: !self.no_faf,
            use_kf: !self.no_kf,
            floors_only: self.floors_only,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Building description (JSON).
    #[arg(long, value_name = "FILE")]
    building: PathBuf,
    /// Write the AP registry here.
    #[arg(long, value_name = "FILE")]
    out_registry: Option<PathBuf>,
    /// Walk trajectory (JSON); requires --out-trace.
    #[arg(long, value_name = "FILE", requires = "out_trace")]
    trajectory: Option<PathBuf>,
    /// Write the scan trace (JSON-lines) here.
    #[arg(long, value_name = "FILE", requires = "trajectory")]
    out_trace: Option<PathBuf>,
    /// Write rank-calibration samples (JSON-lines) here.
    #[arg(long, value_name = "FILE")]
    out_rank_samples: Option<PathBuf>,
    /// How many rank-calibration samples to draw.
    #[arg(long, value_name = "N", default_value_t = 8000)]
    rank_samples: usize,
    /// Receiver gain offset applied to the walking device, dB.
    #[arg(long, value_name = "DB")]
    device_offset: Option<f64>,
    #[command(flatten)]
    propagation: PropagationArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthTrainArgs {
    /// Deployment building description (JSON).
    #[arg(long, value_name = "FILE")]
    building: PathBuf,
    /// Building to simulate the raw scans in; defaults to the deployment
    /// building itself. Visible-AP counts are shaped to the deployment
    /// either way.
    #[arg(long, value_name = "FILE")]
    source_building: Option<PathBuf>,
    /// Write the labeled dataset here.
    #[arg(long, value_name = "FILE")]
    out_dataset: PathBuf,
    /// Std-dev of the RSS perturbation applied to augmented samples, dB.
    #[arg(long, value_name = "DB", default_value_t = 1.5)]
    perturb_sigma: f64,
    /// Balanced instances per floor label.
    #[arg(long, value_name = "N", default_value_t = 500)]
    per_label: usize,
    /// Floor search-range width the classifier will operate on.
    #[arg(long, value_name = "W", default_value_t = DEFAULT_RANGE_WIDTH)]
    range_width: u32,
    /// Disable augmentation: survey-style clean instances labeled through
    /// the detection-time window rule (no perturbation or balancing).
    #[arg(long)]
    no_augment: bool,
    /// Subsample surplus APs uniformly instead of keeping the strongest.
    #[arg(long)]
    subsample_random: bool,
    #[command(flatten)]
    propagation: PropagationArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainFloorArgs {
    /// Labeled dataset produced by synth-train.
    #[arg(long, value_name = "FILE")]
    dataset: PathBuf,
    /// Write the trained floor model here.
    #[arg(long, value_name = "FILE")]
    out_model: PathBuf,
    /// Write the per-epoch loss curve (CSV) here.
    #[arg(long, value_name = "FILE")]
    out_loss: Option<PathBuf>,
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 100, 100, 100])]
    hidden: Vec<usize>,
    /// Dropout ratio after the first hidden layer.
    #[arg(long, default_value_t = 0.25)]
    dropout: f64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    /// Fraction held out for early stopping (0 disables).
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    /// Early-stop patience in epochs (0 disables).
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitRankArgs {
    /// Calibration samples (JSON-lines of distance/rss pairs).
    #[arg(long, value_name = "FILE")]
    samples: PathBuf,
    /// Write the fitted rank model here.
    #[arg(long, value_name = "FILE")]
    out_model: PathBuf,
    /// Fraction of samples a rank's trimmed fit must retain.
    #[arg(long, default_value_t = 0.8)]
    anomaly_threshold: f64,
}

#[derive(Args)]
struct FitQualityArgs {
    /// Scan trace with embedded ground truth (JSON-lines).
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    registry: PathBuf,
    #[arg(long, value_name = "FILE")]
    floor_model: PathBuf,
    #[arg(long, value_name = "FILE")]
    rank_model: PathBuf,
    /// Write the fitted quality model here.
    #[arg(long, value_name = "FILE")]
    out_model: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct LocateArgs {
    /// Scan trace to localize (JSON-lines).
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    #[arg(long, value_name = "FILE")]
    registry: PathBuf,
    #[arg(long, value_name = "FILE")]
    floor_model: PathBuf,
    #[arg(long, value_name = "FILE")]
    rank_model: PathBuf,
    /// Optional fix-quality model; without it the quality radius falls
    /// back to the near-peak region's equivalent-circle radius.
    #[arg(long, value_name = "FILE")]
    quality_model: Option<PathBuf>,
    /// Write fixes (JSON-lines) here.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Fixes produced by locate (JSON-lines).
    #[arg(long, value_name = "FILE")]
    fixes: PathBuf,
    /// Trace carrying the ground truth the fixes are scored against.
    #[arg(long, value_name = "FILE")]
    trace: PathBuf,
    /// Write the metrics report (JSON) here.
    #[arg(long, value_name = "FILE")]
    out_report: PathBuf,
    /// Write the error CDF (CSV) here.
    #[arg(long, value_name = "FILE")]
    out_cdf: Option<PathBuf>,
    /// Extra key=value pairs echoed into the report's config block.
    #[arg(long = "config", value_name = "KEY=VALUE", value_parser = parse_kv)]
    config: Vec<(String, String)>,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Check a trained floor model instead of random architectures.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Number of random models (or probes of --model) to check.
    #[arg(long, default_value_t = 20)]
    count: usize,
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    /// Fail (exit 3) if the worst relative error reaches this.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_kv(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("{s:?} is not key=value"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, class) = classify(&err);
            eprintln!("error[{class}]: {err}");
            ExitCode::from(code)
        }
    }
}

/// Schema-class failures (exit 2) are problems with the inputs themselves;
/// everything else — numeric failures, I/O, degenerate data — exits 3.
fn classify(err: &Error) -> (u8, &'static str) {
    match err {
        Error::InvalidCoordinate(_)
        | Error::MacParse { .. }
        | Error::RegistryInvalid(_)
        | Error::ScanInvalid(_)
        | Error::UnregisteredMac(_)
        | Error::DimensionMismatch { .. }
        | Error::RankModelInvalid(_)
        | Error::SimConfigInvalid(_)
        | Error::Schema(_)
        | Error::Json(_) => (2, "schema"),
        _ => (3, "runtime"),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate(args) => simulate(args),
        Command::SynthTrain(args) => synth_train(args),
        Command::TrainFloor(args) => train_floor(args),
        Command::FitRank(args) => fit_rank(args),
        Command::FitQuality(args) => fit_quality(args),
        Command::Locate(args) => locate(args),
        Command::Evaluate(args) => evaluate(args),
        Command::GradCheck(args) => grad_check(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    if args.out_registry.is_none() && args.out_trace.is_none() && args.out_rank_samples.is_none() {
        return Err(Error::Schema(
            "simulate: nothing to do; pass --out-registry, --out-trace, or --out-rank-samples"
                .into(),
        ));
    }
    let spec: BuildingSpec = read_json(&args.building)?;
    let params = args.propagation.apply(PropagationParams::default());
    params.validate()?;
    let building = generate_building(&spec)?;
    log::info!(
        "building {:?}: {} floors, {} APs, sigma_sh={} dB",
        spec.id,
        spec.floors.len(),
        building.registry.ap_count(),
        params.sigma_sh
    );

    if let Some(path) = &args.out_registry {
        formats::write_registry(path, &building.registry)?;
        log::info!("wrote registry to {}", path.display());
    }
    if let Some(traj_path) = &args.trajectory {
        let mut traj: Trajectory = read_json(traj_path)?;
        if let Some(db) = args.device_offset {
            traj.device_offset_db = db;
        }
        let trace = generate_trace(&building, &traj, &params, args.seed)?;
        let out = args.out_trace.as_ref().expect("clap enforces the pairing");
        let data = TraceData::from(trace);
        formats::write_trace(out, &data)?;
        log::info!("wrote {} scans to {}", data.scans.len(), out.display());
    }
    if let Some(path) = &args.out_rank_samples {
        let samples = rank_training_samples(&building, &params, args.rank_samples, args.seed)?;
        formats::write_rank_samples(path, &samples)?;
        log::info!("wrote {} rank samples to {}", samples.len(), path.display());
    }
    Ok(())
}

fn synth_train(args: SynthTrainArgs) -> Result<()> {
    let spec: BuildingSpec = read_json(&args.building)?;
    let building = generate_building(&spec)?;
    let source = match &args.source_building {
        Some(path) => {
            let src_spec: BuildingSpec = read_json(path)?;
            generate_building(&src_spec)?
        }
        None => building.clone(),
    };
    // Training draws from a noise-free simulation; robustness comes from
    // the explicit perturbation step, which augmentation controls.
    let mut base = PropagationParams::default();
    base.sigma_sh = 0.0;
    let params = args.propagation.apply(base);
    params.validate()?;
    let config = SynthConfig {
        sigma: args.perturb_sigma,
        per_label: args.per_label,
        range_width: args.range_width,
        augment: !args.no_augment,
        subsample_strongest: !args.subsample_random,
        seed: args.seed,
    };
    let set = synthesize_training_set(&source, &building.registry, &params, &config)?;
    let counts = set.class_counts();
    let dataset = dataset_from_set(&set);
    formats::write_dataset(&args.out_dataset, &dataset)?;
    log::info!(
        "wrote {} instances (per-label counts {:?}) to {}",
        set.len(),
        counts,
        args.out_dataset.display()
    );
    Ok(())
}

fn train_floor(args: TrainFloorArgs) -> Result<()> {
    let dataset = formats::read_dataset(&args.dataset)?;
    let pairs = dataset.training_pairs();
    let input_dim = dataset.features_per_floor as usize * dataset.range_width as usize;
    let output_dim = dataset.range_width as usize;
    let mut model = Mlp::new(input_dim, &args.hidden, output_dim, args.dropout, args.seed);
    let config = TrainConfig {
        learning_rate: args.learning_rate,
        batch_size: args.batch_size,
        epochs: args.epochs,
        val_fraction: args.val_fraction,
        patience: args.patience,
        seed: args.seed,
        ..TrainConfig::default()
    };
    let report = model.train(&pairs, &config)?;
    let accuracy = model.accuracy(&pairs)?;
    log::info!(
        "trained {} epochs (best {}), final train loss {:.4}, training accuracy {:.1}%",
        report.loss_curve.len(),
        report.best_epoch,
        report.loss_curve.last().copied().unwrap_or(f64::NAN),
        100.0 * accuracy
    );

    if let Some(path) = &args.out_loss {
        write_loss_csv(path, &report.loss_curve, &report.val_curve)?;
        log::info!("wrote loss curve to {}", path.display());
    }
    let file = FloorModelFile::new(dataset.range_width, model);
    formats::write_floor_model(&args.out_model, &file)?;
    log::info!("wrote floor model to {}", args.out_model.display());
    Ok(())
}

fn write_loss_csv(path: &Path, train: &[f64], val: &[f64]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "epoch,train_loss,val_loss")?;
    for (epoch, loss) in train.iter().enumerate() {
        match val.get(epoch) {
            Some(v) => writeln!(out, "{epoch},{loss},{v}")?,
            None => writeln!(out, "{epoch},{loss},")?,
        }
    }
    out.flush()?;
    Ok(())
}

fn fit_rank(args: FitRankArgs) -> Result<()> {
    let samples = formats::read_rank_samples(&args.samples)?;
    let provenance = args.samples.display().to_string();
    let model = fit_rank_model(&samples, args.anomaly_threshold, provenance)?;
    formats::write_rank_model(&args.out_model, &model)?;
    log::info!(
        "fitted rank model from {} samples to {}",
        samples.len(),
        args.out_model.display()
    );
    Ok(())
}

fn fit_quality(args: FitQualityArgs) -> Result<()> {
    let registry = formats::read_registry(&args.registry)?;
    let floor_model = formats::read_floor_model(&args.floor_model)?;
    let rank_model = formats::read_rank_model(&args.rank_model)?;
    let data = formats::read_trace(&args.trace)?;

    // Quality regresses the error of *raw* fixes — the Kalman stage later
    // consumes the prediction as measurement noise, so it must stay out of
    // the training loop.
    let mut config = args.engine.to_config(floor_model.range_width);
    config.use_kf = false;
    config.floors_only = false;
    eprintln!("config: {}", config.echo());

    let fixes = locate_trace(&registry, &floor_model.model, &rank_model, None, &config, &data.scans)?;
    let truths: Vec<_> = data.truth.iter().flatten().collect();
    let mut samples: Vec<(QualityFeatures, f64)> = Vec::new();
    let mut cursor = 0usize;
    for fix in &fixes {
        let (Some(raw), Some(features)) = (&fix.raw, &fix.features) else { continue };
        while cursor < truths.len() && truths[cursor].t < fix.t - 1e-6 {
            cursor += 1;
        }
        let Some(gt) = truths.get(cursor) else { break };
        if (gt.t - fix.t).abs() > 1e-6 {
            continue;
        }
        samples.push((features.clone(), haversine_distance(raw.point, gt.point)));
    }
    let model = fit_quality_model(&samples)?;
    formats::write_quality_model(&args.out_model, &model)?;
    log::info!(
        "fitted quality model on {} fixes to {}",
        samples.len(),
        args.out_model.display()
    );
    Ok(())
}

fn locate(args: LocateArgs) -> Result<()> {
    let registry = formats::read_registry(&args.registry)?;
    let floor_model = formats::read_floor_model(&args.floor_model)?;
    let rank_model = formats::read_rank_model(&args.rank_model)?;
    let quality_model = match &args.quality_model {
        Some(path) => Some(formats::read_quality_model(path)?),
        None => None,
    };
    let data = formats::read_trace(&args.trace)?;

    let config = args.engine.to_config(floor_model.range_width);
    eprintln!("config: {}", config.echo());

    let fixes = locate_trace(
        &registry,
        &floor_model.model,
        &rank_model,
        quality_model.as_ref(),
        &config,
        &data.scans,
    )?;
    let records: Vec<FixRecord> = fixes
        .iter()
        .map(|fix| match fix.best() {
            Some(best) => FixRecord::located(best, fix.quality),
            None => FixRecord::floor_only(fix.t, fix.floor),
        })
        .collect();
    formats::write_fixes(&args.out, &records)?;
    let located = records.iter().filter(|r| r.point().is_some()).count();
    log::info!(
        "wrote {} fixes ({} with 2D positions) from {} scans to {}",
        records.len(),
        located,
        data.scans.len(),
        args.out.display()
    );
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let fixes = formats::read_fixes(&args.fixes)?;
    let data = formats::read_trace(&args.trace)?;
    let truth: Vec<_> = data.truth.into_iter().flatten().collect();
    let config: BTreeMap<String, String> = args.config.into_iter().collect();
    let report = compute_metrics(&fixes, &truth, config)?;
    write_metrics(&args.out_report, &report)?;
    if let Some(path) = &args.out_cdf {
        write_cdf_csv(path, &report)?;
    }
    let fmt = |q: Option<f64>| q.map_or_else(|| "-".into(), |v| format!("{v:.3}"));
    println!(
        "fixes={} matched={} located={} exact_floor_pct={:.2} p50_m={} p75_m={} p90_m={}",
        report.fixes,
        report.matched,
        report.located,
        report.exact_floor_pct,
        fmt(report.error_p50_m),
        fmt(report.error_p75_m),
        fmt(report.error_p90_m),
    );
    Ok(())
}

fn grad_check(args: GradCheckArgs) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst = 0.0f64;
    match &args.model {
        Some(path) => {
            let file = formats::read_floor_model(path)?;
            for _ in 0..args.count {
                let x: Vec<f64> = (0..file.model.input_dim()).map(|_| rng.gen::<f64>()).collect();
                let label = rng.gen_range(0..file.model.output_dim());
                worst = worst.max(file.model.grad_check(&x, label, args.step)?);
            }
        }
        None => {
            for i in 0..args.count {
                let input = rng.gen_range(4..=24);
                let hidden: Vec<usize> =
                    (0..rng.gen_range(1..=2)).map(|_| rng.gen_range(4..=24)).collect();
                let output = rng.gen_range(2..=6);
                let model = Mlp::new(input, &hidden, output, 0.25, args.seed ^ i as u64);
                let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let label = rng.gen_range(0..output);
                worst = worst.max(model.grad_check(&x, label, args.step)?);
            }
        }
    }
    println!("max_rel_err={worst:e}");
    if worst >= args.tolerance {
        return Err(Error::Pipeline(format!(
            "gradient check failed: max relative error {worst:e} >= {:e}",
            args.tolerance
        )));
    }
    Ok(())
}
