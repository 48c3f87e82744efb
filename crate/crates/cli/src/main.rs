//! `latgraph`: synthetic data, training, sweeps, robustness curves and reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use latgraph::data_io::{load_dataset, synth_dataset, SynthSpec};
use latgraph::experiment::{
    collect_sweeps, robustness_eval, run_sweep, train_single, write_report, ExperimentConfig, RobustnessPoint,
    SavedModel,
};
use latgraph::Error;

#[derive(Parser, Debug)]
#[command(name = "latgraph", version, about = "Latent graph classification of slice-embedded volumes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset (feature files plus manifest).
    Synth(SynthArgs),
    /// Train one head/topology for each seed.
    Train(RunArgs),
    /// Test-split metrics of a saved checkpoint.
    Evaluate(EvalArgs),
    /// Train every cell of the topology × convolution grid.
    Sweep(RunArgs),
    /// Test AUROC of a saved checkpoint at each perturbation level.
    Robustness(RobustnessArgs),
    /// Render tables from the runs persisted under an output directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML file with any `SynthSpec` fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    train: Option<usize>,
    #[arg(long)]
    val: Option<usize>,
    #[arg(long)]
    test: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    signal: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Perturbation level to emit; repeatable.
    #[arg(long = "level")]
    levels: Vec<f64>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment TOML; relative paths inside resolve against its directory.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seeds, e.g. `0,1,2`.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    workers: Option<usize>,
    /// Perturbation level to train on.
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    level: f64,
}

#[derive(Args, Debug)]
struct RobustnessArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Level to evaluate; repeatable.
    #[arg(long = "level", required = true)]
    levels: Vec<f64>,
    /// Output directory; the curve goes to `<out>/robustness/<name>.json`.
    #[arg(long)]
    out: PathBuf,
    /// Curve name; defaults to the checkpoint file stem.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct ErrorSummary<'a> {
    status: &'static str,
    command: &'a str,
    kind: &'static str,
    error: String,
    causes: Vec<String>,
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    match err.downcast_ref::<Error>() {
        Some(Error::Config(_)) => "config",
        Some(Error::Shape { .. }) => "shape",
        Some(Error::Data(_)) => "data",
        Some(Error::Graph(_)) => "graph",
        Some(Error::UndefinedMetric(_)) => "undefined_metric",
        Some(Error::NonFinite(_)) => "non_finite",
        Some(Error::Format { .. }) => "format",
        Some(Error::Load { .. }) => "load",
        Some(Error::MissingLevel(_)) => "missing_level",
        Some(Error::Io(_)) => "io",
        Some(Error::Json(_)) => "json",
        None if err.downcast_ref::<toml::de::Error>().is_some() => "config",
        None if err.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "other",
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Train(_) => "train",
        Command::Evaluate(_) => "evaluate",
        Command::Sweep(_) => "sweep",
        Command::Robustness(_) => "robustness",
        Command::Report(_) => "report",
    };
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Sweep(a) => sweep(a),
        Command::Robustness(a) => robustness(a),
        Command::Report(a) => report(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let summary = ErrorSummary {
                status: "error",
                command: name,
                kind: error_kind(&err),
                error: err.to_string(),
                causes: err.chain().skip(1).map(|c| c.to_string()).collect(),
            };
            eprintln!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::FAILURE
        }
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec: SynthSpec = match &a.config {
        Some(p) => toml::from_str(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SynthSpec::default(),
    };
    spec.train = a.train.unwrap_or(spec.train);
    spec.val = a.val.unwrap_or(spec.val);
    spec.test = a.test.unwrap_or(spec.test);
    spec.num_classes = a.classes.unwrap_or(spec.num_classes);
    spec.signal = a.signal.unwrap_or(spec.signal);
    spec.noise = a.noise.unwrap_or(spec.noise);
    spec.seed = a.seed.unwrap_or(spec.seed);
    if !a.levels.is_empty() {
        spec.levels = a.levels;
    }
    let manifest = synth_dataset(&spec, &a.out)?;
    log::info!("wrote {}", manifest.display());
    println!("{}", manifest.display());
    Ok(())
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() && !p.as_os_str().is_empty() {
        *p = base.join(&*p);
    }
}

/// Config file, then command-line overrides.
fn experiment_config(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let mut cfg: ExperimentConfig = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let base = p.parent().unwrap_or(Path::new("."));
            rebase(base, &mut cfg.manifest);
            rebase(base, &mut cfg.out_dir);
            cfg
        }
        None => ExperimentConfig::default(),
    };
    if let Some(m) = &a.manifest {
        cfg.manifest = m.clone();
    }
    if let Some(o) = &a.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = &a.seeds {
        cfg.train.seeds = s.clone();
    }
    if let Some(w) = a.workers {
        cfg.workers = w;
    }
    if let Some(l) = a.level {
        cfg.level = l;
    }
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if cfg.manifest.as_os_str().is_empty() {
        bail!(Error::Config("no manifest: pass --manifest or set `manifest` in the config".into()));
    }
    Ok(cfg)
}

fn train(a: RunArgs) -> Result<()> {
    let cfg = experiment_config(&a)?;
    let (summary, _) = train_single(&cfg)?;
    print_json(&summary)
}

fn evaluate(a: EvalArgs) -> Result<()> {
    let saved = SavedModel::load(&a.checkpoint)?;
    let dataset = load_dataset::<f64>(&a.manifest, a.level)?;
    if dataset.is_empty() {
        bail!(Error::MissingLevel(a.level));
    }
    let e = saved.evaluate_test(&dataset)?;
    print_json(&serde_json::json!({
        "level": a.level,
        "test_subjects": dataset.test.len(),
        "auroc": e.auroc,
        "accuracy": e.accuracy,
    }))
}

fn sweep(a: RunArgs) -> Result<()> {
    let cfg = experiment_config(&a)?;
    let result = run_sweep(&cfg)?;
    let failed: usize = result.cells.iter().map(|c| c.failures.len()).sum();
    match result.best_cell().and_then(|c| c.summary.as_ref().map(|s| (c, s))) {
        Some((c, s)) => log::info!("best cell: {} (auroc {:.4})", c.label, s.auroc.mean),
        None => log::warn!("no cell completed"),
    }
    print_json(&result)?;
    if failed > 0 {
        bail!(Error::Data(format!(
            "{failed} run(s) failed; see {}",
            cfg.out_dir.join("failures").display()
        )));
    }
    Ok(())
}

fn robustness(a: RobustnessArgs) -> Result<()> {
    let saved = SavedModel::load(&a.checkpoint)?;
    let points = robustness_eval(&saved, &a.manifest, &a.levels)?;
    let name = a.name.clone().unwrap_or_else(|| {
        a.checkpoint
            .file_stem()
            .map_or_else(|| "curve".to_string(), |s| s.to_string_lossy().into_owned())
    });
    let path = a.out.join("robustness").join(format!("{name}.json"));
    fs::create_dir_all(path.parent().unwrap())?;
    fs::write(&path, serde_json::to_vec_pretty(&points)?)?;
    log::info!("wrote {}", path.display());
    print_json(&points)
}

fn report(a: ReportArgs) -> Result<()> {
    let sweeps = collect_sweeps(&a.out)?;
    if sweeps.is_empty() {
        bail!(Error::Data(format!("no run records under {}", a.out.join("runs").display())));
    }
    let mut curves: Vec<(String, Vec<RobustnessPoint>)> = Vec::new();
    let dir = a.out.join("robustness");
    if dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        for p in paths {
            let points = serde_json::from_slice(&fs::read(&p)?).with_context(|| format!("reading {}", p.display()))?;
            curves.push((p.file_stem().unwrap().to_string_lossy().into_owned(), points));
        }
    }
    for path in write_report(&a.out, &sweeps, &curves)? {
        log::info!("wrote {}", path.display());
    }
    print!("{}", fs::read_to_string(a.out.join("report.txt"))?);
    Ok(())
}
