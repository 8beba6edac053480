//! `sprout`: synthesize, preprocess, featurize, train, predict, evaluate and
//! report from the command line.
//!
//! Settings resolve as defaults, then the `--config` TOML file, then flags.
//! Seeds resolve as `--seed`, then `SPROUT_SEED`, then the config file.
//! Failures print one JSON line on stderr and exit with 2 (usage), 3 (invalid
//! configuration), 4 (missing input) or 1 (anything else).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use sprout_core::config::Strategy;
use sprout_core::evaluate::{evaluate_labeled, EvaluationReport};
use sprout_core::features::{build_dataset, FeaturePipeline};
use sprout_core::ingest::{self, Manifest, ManifestSubject};
use sprout_core::model::{self, ModelFile};
use sprout_core::preprocess::{self, ConditionedSignal};
use sprout_core::synth::{self, SynthConfig};
use sprout_core::{Error, PipelineConfig};

const SEED_ENV: &str = "SPROUT_SEED";

#[derive(Parser)]
#[command(name = "sprout", version, about = "Forecast sprouting day from long voltage recordings")]
struct Cli {
    /// TOML file with one table per stage; flags override it.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Maximum worker threads.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,

    /// Where to write run_meta.json (default: next to the command's output).
    #[arg(long, global = true, value_name = "PATH")]
    run_meta: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (manifest + CSVs).
    Synth(SynthArgs),
    /// Filter and downsample every signal; writes `*.conditioned.csv`.
    Preprocess(PreprocessArgs),
    /// Write the per-window feature table.
    Features(FeaturesArgs),
    /// Fit a model on every subject of a dataset.
    Train(TrainArgs),
    /// Estimate each subject's event day with a trained model.
    Predict(PredictArgs),
    /// Leave-one-subject-out evaluation.
    Evaluate(EvaluateArgs),
    /// Summarize a report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    subjects: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    days_min: Option<u32>,
    #[arg(long)]
    days_max: Option<u32>,
    /// Days before the event at which the signature starts.
    #[arg(long)]
    onset_days: Option<u32>,
    #[arg(long)]
    gain: Option<f64>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    drift: Option<f64>,
    #[arg(long)]
    band_low: Option<f64>,
    #[arg(long)]
    band_high: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    storage_temp: Option<i32>,
    /// Generate at 256 Hz with mains interference.
    #[arg(long)]
    raw_256hz: bool,
}

#[derive(Args)]
struct ChainArgs {
    /// Notch centre in Hz; repeat for several.
    #[arg(long)]
    notch: Vec<f64>,
    #[arg(long)]
    notch_q: Option<f64>,
    #[arg(long)]
    lowpass: Option<f64>,
    #[arg(long)]
    target_hz: Option<f64>,
    #[arg(long)]
    window_seconds: Option<u64>,
}

#[derive(Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long)]
    scales: Option<usize>,
    #[arg(long)]
    wavelet: Option<String>,
    #[arg(long)]
    omega0: Option<f64>,
    #[arg(long)]
    entropy_bins: Option<usize>,
    /// Describe raw windows instead of scalograms.
    #[arg(long)]
    time_domain: bool,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory for one scalogram CSV per window (rows = scales).
    #[arg(long)]
    dump_scalogram: Option<PathBuf>,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Largest accepted 95 % interval width, days.
    #[arg(long)]
    uq_th: Option<f64>,
    #[arg(long)]
    members: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Use windows from days strictly before this offset.
    #[arg(long, allow_hyphen_values = true)]
    observe_day: i64,
    #[arg(long)]
    uq_th: Option<f64>,
    /// Write JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    curves_dir: Option<PathBuf>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    rolling_n: Option<usize>,
    #[command(flatten)]
    strategy: StrategyArgs,
    #[command(flatten)]
    chain: ChainArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    report: PathBuf,
    /// Rewrite the plot-ready curves here.
    #[arg(long)]
    curves_dir: Option<PathBuf>,
    /// Write the summary here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn usage(message: String) -> Self {
        Self { code: 2, kind: "usage", message }
    }

    fn config(message: String) -> Self {
        Self { code: 3, kind: "invalid_config", message }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => (4, "missing_input"),
            Error::Config(_) | Error::AboveNyquist { .. } | Error::NonIntegerRatio { .. } | Error::ScalePlan(_) => {
                (3, "invalid_config")
            }
            _ => (1, "failed"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct RunMeta<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    argv: Vec<String>,
    config_file: Option<&'a Path>,
    jobs: Option<u16>,
    seed: Option<u64>,
    seed_source: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pipeline: Option<&'a PipelineConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    synth: Option<&'a SynthConfig>,
    inputs: Vec<&'a Path>,
    outputs: Vec<&'a Path>,
}

struct Context {
    config_file: Option<PathBuf>,
    jobs: Option<u16>,
    run_meta: Option<PathBuf>,
    pipeline: PipelineConfig,
    synth: SynthConfig,
}

impl Context {
    fn meta(&self, command: &'static str) -> RunMeta<'_> {
        RunMeta {
            tool: "sprout",
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            config_file: self.config_file.as_deref(),
            jobs: self.jobs,
            seed: None,
            seed_source: None,
            pipeline: None,
            synth: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    fn write_meta(&self, meta: &RunMeta<'_>, default_dir: &Path) -> CliResult<()> {
        let path = self
            .run_meta
            .clone()
            .unwrap_or_else(|| default_dir.join("run_meta.json"));
        write_json(&path, meta)
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e }.into())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    create_dir(&parent_dir(path))?;
    std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e }.into())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    text.push('\n');
    write_text(path, &text)
}

/// Split the config file into the pipeline tables and the optional `[synth]`
/// table.
fn load_config(path: Option<&Path>) -> CliResult<(PipelineConfig, SynthConfig)> {
    let Some(path) = path else {
        return Ok((PipelineConfig::default(), SynthConfig::default()));
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
    let bad = |e: toml::de::Error| Failure::config(format!("{}: {}", path.display(), e.message()));
    let mut table: toml::Table = toml::from_str(&text).map_err(bad)?;
    let synth = match table.remove("synth") {
        Some(v) => v.try_into::<SynthConfig>().map_err(bad)?,
        None => SynthConfig::default(),
    };
    let pipeline: PipelineConfig = toml::Value::Table(table).try_into().map_err(bad)?;
    Ok((pipeline, synth))
}

fn resolve_seed(flag: Option<u64>, from_config: u64) -> CliResult<(u64, &'static str)> {
    if let Some(seed) = flag {
        return Ok((seed, "flag"));
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(|s| (s, "env"))
            .map_err(|_| Failure::config(format!("{SEED_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok((from_config, "config")),
    }
}

fn apply_chain(config: &mut PipelineConfig, a: &ChainArgs) {
    let p = &mut config.preprocess;
    if !a.notch.is_empty() {
        p.notch_hz = a.notch.clone();
    }
    if let Some(q) = a.notch_q {
        p.notch_q = q;
    }
    if let Some(f) = a.lowpass {
        p.lowpass_hz = f;
    }
    if let Some(f) = a.target_hz {
        p.target_hz = f;
    }
    if let Some(s) = a.window_seconds {
        config.window.seconds = s;
    }
}

fn apply_features(config: &mut PipelineConfig, a: &FeatureArgs) {
    if let Some(k) = a.scales {
        config.wavelet.scales = k;
    }
    if let Some(w) = &a.wavelet {
        config.wavelet.wavelet = w.clone();
    }
    if let Some(w) = a.omega0 {
        config.wavelet.omega0 = w;
    }
    if let Some(b) = a.entropy_bins {
        config.features.entropy_bins = b;
    }
    if a.time_domain {
        config.features.time_domain = true;
    }
}

fn apply_strategy(config: &mut PipelineConfig, a: &StrategyArgs) -> CliResult<&'static str> {
    if let Some(s) = a.strategy {
        config.strategy.kind = s;
    }
    if a.uq_th.is_some() {
        config.strategy.uq_th = a.uq_th;
    }
    if let Some(m) = a.members {
        config.strategy.members = m;
    }
    let (seed, source) = resolve_seed(a.seed, config.regressor.seed)?;
    config.regressor.seed = seed;
    Ok(source)
}

fn validated(config: &PipelineConfig) -> CliResult<()> {
    config.validate()?;
    config.require_uq_th()?;
    Ok(())
}

fn run_synth(ctx: &Context, a: &SynthArgs) -> CliResult<()> {
    let mut cfg = ctx.synth.clone();
    if a.raw_256hz {
        cfg = cfg.raw_256hz();
    }
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => { $(if let Some(v) = a.$flag { cfg.$field = v; })* };
    }
    set!(subjects => n_subjects, days_min => days_min, days_max => days_max,
         onset_days => signature_onset_days_before, gain => signature_gain,
         noise_std => noise_std, drift => drift_amplitude, storage_temp => storage_temp_c);
    if let Some(lo) = a.band_low {
        cfg.signature_band_hz.0 = lo;
    }
    if let Some(hi) = a.band_high {
        cfg.signature_band_hz.1 = hi;
    }
    let (seed, source) = resolve_seed(a.seed, cfg.seed)?;
    cfg.seed = seed;
    cfg.validate()?;

    create_dir(&a.out)?;
    let subjects = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| {
            let rec = synth::generate_recording(&cfg, i)?;
            let file_name = format!("{}.csv", rec.subject_id);
            ingest::write_signal_csv(&a.out.join(&file_name), &rec.samples, rec.sample_rate_hz)?;
            Ok(ManifestSubject::from_recording(&rec, file_name))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let manifest_path = a.out.join("manifest.json");
    ingest::write_manifest(
        &manifest_path,
        &Manifest {
            label: format!("synthetic-seed{seed}"),
            subjects,
        },
    )?;
    println!("wrote {} subjects to {}", cfg.n_subjects, manifest_path.display());

    let mut meta = ctx.meta("synth");
    meta.seed = Some(seed);
    meta.seed_source = Some(source);
    meta.synth = Some(&cfg);
    meta.outputs = vec![&manifest_path];
    ctx.write_meta(&meta, &a.out)
}

fn conditioned_name(signal_path: &str) -> String {
    let stem = signal_path.strip_suffix(".csv").unwrap_or(signal_path);
    format!("{stem}.conditioned.csv")
}

fn run_preprocess(ctx: &Context, a: &PreprocessArgs) -> CliResult<()> {
    let mut config = ctx.pipeline.clone();
    apply_chain(&mut config, &a.chain);
    config.validate()?;
    let manifest = ingest::read_manifest(&a.manifest)?;
    let base = ingest::manifest_dir(&a.manifest);
    let window_len = preprocess::window_len(config.preprocess.target_hz, config.window.seconds)?;

    let mut subjects = Vec::with_capacity(manifest.subjects.len());
    for s in &manifest.subjects {
        let rec = ingest::load_subject(s, &base)?;
        let out = preprocess::condition(&ConditionedSignal::from_recording(&rec), &config.preprocess)?;
        let name = conditioned_name(&s.signal_path);
        ingest::write_signal_csv(&base.join(&name), &out.samples, out.sample_rate_hz)?;
        println!(
            "{}: {} samples at {} Hz, {} full windows",
            s.id,
            out.samples.len(),
            out.sample_rate_hz,
            out.samples.len() / window_len
        );
        subjects.push(ManifestSubject {
            sample_rate_hz: out.sample_rate_hz,
            signal_path: name,
            ..s.clone()
        });
    }
    let out_manifest = base.join("manifest.conditioned.json");
    ingest::write_manifest(
        &out_manifest,
        &Manifest {
            label: manifest.label,
            subjects,
        },
    )?;

    let mut meta = ctx.meta("preprocess");
    meta.pipeline = Some(&config);
    meta.inputs = vec![&a.manifest];
    meta.outputs = vec![&out_manifest];
    ctx.write_meta(&meta, &base)
}

fn run_features(ctx: &Context, a: &FeaturesArgs) -> CliResult<()> {
    let mut config = ctx.pipeline.clone();
    apply_chain(&mut config, &a.chain);
    apply_features(&mut config, &a.features);
    config.validate()?;
    if a.dump_scalogram.is_some() && config.features.time_domain {
        return Err(Failure::config("--dump-scalogram needs CWT features, not --time-domain".into()));
    }
    let dataset = ingest::load_dataset(&a.manifest)?;
    let pipeline = FeaturePipeline::new(&config)?;

    create_dir(&parent_dir(&a.out))?;
    let file = File::create(&a.out).map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    let mut table = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Failure {
        code: 1,
        kind: "failed",
        message: format!("{}: {e}", a.out.display()),
    };
    let mut header = vec![
        "subject_id".to_string(),
        "window_index".into(),
        "day_offset".into(),
        "target_days".into(),
    ];
    header.extend((0..pipeline.n_features()).map(|i| format!("f_{i:03}")));
    table.write_record(&header).map_err(csv_err)?;

    if let Some(dir) = &a.dump_scalogram {
        create_dir(dir)?;
    }
    let mut rows = 0usize;
    for rec in &dataset.recordings {
        let event = rec.sprouting_offset();
        for window in pipeline.windows(rec)? {
            if event.is_some_and(|d| window.day_offset > d) {
                continue;
            }
            let fv = pipeline.describe(&window)?;
            let mut row = vec![
                fv.subject_id.clone(),
                fv.window_index.to_string(),
                fv.day_offset.to_string(),
                event.map(|d| (d - fv.day_offset).to_string()).unwrap_or_default(),
            ];
            row.extend(fv.values.iter().map(f64::to_string));
            table.write_record(&row).map_err(csv_err)?;
            rows += 1;

            if let (Some(dir), Some(tw)) = (&a.dump_scalogram, pipeline.scalogram(&window)?) {
                let path = dir.join(format!("{}_w{:04}.csv", rec.subject_id, window.window_index));
                let body: String = tw
                    .coefficients
                    .iter()
                    .map(|row| {
                        let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                        cells.join(",") + "\n"
                    })
                    .collect();
                write_text(&path, &body)?;
            }
        }
    }
    table
        .into_inner()
        .map_err(|e| Error::Io { path: a.out.clone(), source: e.into_error() })?
        .flush()
        .map_err(|e| Error::Io { path: a.out.clone(), source: e })?;
    println!("wrote {rows} windows x {} features to {}", pipeline.n_features(), a.out.display());

    let mut meta = ctx.meta("features");
    meta.pipeline = Some(&config);
    meta.inputs = vec![&a.manifest];
    meta.outputs = vec![&a.out];
    ctx.write_meta(&meta, &parent_dir(&a.out))
}

fn run_train(ctx: &Context, a: &TrainArgs) -> CliResult<()> {
    let mut config = ctx.pipeline.clone();
    apply_chain(&mut config, &a.chain);
    apply_features(&mut config, &a.features);
    let source = apply_strategy(&mut config, &a.strategy)?;
    validated(&config)?;

    let dataset = ingest::load_dataset(&a.manifest)?;
    let set = build_dataset(&dataset, &config)?;
    let file = model::train(&set, &config)?;
    create_dir(&parent_dir(&a.model_out))?;
    file.save(&a.model_out)?;
    println!(
        "trained {:?} model on {} windows from {} subjects -> {}",
        config.strategy.kind,
        set.len(),
        set.subjects.len(),
        a.model_out.display()
    );

    let mut meta = ctx.meta("train");
    meta.seed = Some(config.regressor.seed);
    meta.seed_source = Some(source);
    meta.pipeline = Some(&config);
    meta.inputs = vec![&a.manifest];
    meta.outputs = vec![&a.model_out];
    ctx.write_meta(&meta, &parent_dir(&a.model_out))
}

fn run_predict(ctx: &Context, a: &PredictArgs) -> CliResult<()> {
    let file = ModelFile::load(&a.model)?;
    if let Some(th) = a.uq_th {
        if th.is_nan() || th < 0.0 {
            return Err(Failure::config(format!("--uq-th must be non-negative, got {th}")));
        }
    }
    if matches!(file.model, model::ModelKind::Ensemble { .. })
        && a.uq_th.or(file.pipeline.strategy.uq_th).is_none()
    {
        return Err(Failure::config("ensemble model requires --uq-th".into()));
    }
    let dataset = ingest::load_dataset(&a.manifest)?;
    let predictions = model::predict(&file, &dataset, a.observe_day, a.uq_th)?;
    let mut text = serde_json::to_string_pretty(&predictions).map_err(Error::from)?;
    text.push('\n');
    match &a.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }

    let mut resolved = file.pipeline.clone();
    if a.uq_th.is_some() {
        resolved.strategy.uq_th = a.uq_th;
    }
    let mut meta = ctx.meta("predict");
    meta.pipeline = Some(&resolved);
    meta.inputs = vec![&a.model, &a.manifest];
    meta.outputs = a.out.iter().map(PathBuf::as_path).collect();
    let dir = a.out.as_deref().map(parent_dir).unwrap_or_else(|| PathBuf::from("."));
    ctx.write_meta(&meta, &dir)
}

fn run_evaluate(ctx: &Context, a: &EvaluateArgs) -> CliResult<()> {
    let mut config = ctx.pipeline.clone();
    apply_chain(&mut config, &a.chain);
    apply_features(&mut config, &a.features);
    let source = apply_strategy(&mut config, &a.strategy)?;
    if let Some(w) = a.bin_width {
        config.evaluate.bin_width = w;
    }
    if let Some(n) = a.rolling_n {
        config.evaluate.rolling_n = n;
    }
    validated(&config)?;

    let dataset = ingest::load_dataset(&a.manifest)?;
    let set = build_dataset(&dataset, &config)?;
    let (mut report, _) = evaluate_labeled(&set, &config)?;
    report.dataset_label = dataset.label.clone();
    report.storage_temps_c = dataset.storage_temps();
    write_text(&a.out, &report.to_json()?)?;
    if let Some(dir) = &a.curves_dir {
        report.write_curves(dir)?;
    }
    print!("{}", report.summary());

    let mut meta = ctx.meta("evaluate");
    meta.seed = Some(config.regressor.seed);
    meta.seed_source = Some(source);
    meta.pipeline = Some(&config);
    meta.inputs = vec![&a.manifest];
    meta.outputs = std::iter::once(a.out.as_path()).chain(a.curves_dir.as_deref()).collect();
    ctx.write_meta(&meta, &parent_dir(&a.out))
}

fn run_report(ctx: &Context, a: &ReportArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&a.report).map_err(|e| Error::Io { path: a.report.clone(), source: e })?;
    let report: EvaluationReport = serde_json::from_str(&text).map_err(|e| Failure {
        code: 1,
        kind: "failed",
        message: format!("{}: {e}", a.report.display()),
    })?;
    if let Some(dir) = &a.curves_dir {
        report.write_curves(dir)?;
    }
    match &a.out {
        Some(path) => write_text(path, &report.summary())?,
        None => print!("{}", report.summary()),
    }

    let mut meta = ctx.meta("report");
    meta.inputs = vec![&a.report];
    meta.outputs = a.out.iter().chain(&a.curves_dir).map(PathBuf::as_path).collect();
    let dir = a
        .curves_dir
        .clone()
        .or_else(|| a.out.as_deref().map(parent_dir))
        .unwrap_or_else(|| PathBuf::from("."));
    ctx.write_meta(&meta, &dir)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n as usize)
            .build_global()
            .map_err(|e| Failure::config(format!("--jobs: {e}")))?;
    }
    let (pipeline, synth) = load_config(cli.config.as_deref())?;
    pipeline.validate()?;
    let ctx = Context {
        config_file: cli.config,
        jobs: cli.jobs,
        run_meta: cli.run_meta,
        pipeline,
        synth,
    };
    match &cli.command {
        Command::Synth(a) => run_synth(&ctx, a),
        Command::Preprocess(a) => run_preprocess(&ctx, a),
        Command::Features(a) => run_features(&ctx, a),
        Command::Train(a) => run_train(&ctx, a),
        Command::Predict(a) => run_predict(&ctx, a),
        Command::Evaluate(a) => run_evaluate(&ctx, a),
        Command::Report(a) => run_report(&ctx, a),
    }
}

fn fail(f: Failure) -> ExitCode {
    let line = serde_json::json!({ "error": f.kind, "code": f.code, "message": f.message });
    eprintln!("{line}");
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.render().to_string();
            let first = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ")
                .to_string();
            return fail(Failure::usage(first));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => fail(f),
    }
}
