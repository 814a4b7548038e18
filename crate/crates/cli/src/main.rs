//! `uvnet`: dataset generation, sampling, training, sensitivity sweeps,
//! retrieval and approximation-error analysis.
//!
//! Exit codes: 0 success, 1 internal error, 2 user or configuration error.
//! Failures print one JSON object on stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use uvnet::brep::{normalize, validate, Solid, Violation};
use uvnet::dataset::{config_hash, Dataset, Record};
use uvnet::model::{ModelConfig, Task, UvNet};
use uvnet::sampler::{error_samples, sample_graph, ErrorSamples, SamplingConfig};
use uvnet::ssl::{evaluate_embeddings, pair_cosines, retrieve, train_clr, ClrConfig, EmbeddingIndex};
use uvnet::synth::{dedup_hash, gen_dataset, primitive_corpus, GenConfig};
use uvnet::train::{label_count, metrics_line, run_supervised, sensitivity, TrainConfig};

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("invalid solid {path}: {}", violations.first().map(|v| v.to_string()).unwrap_or_default())]
    InvalidSolid { path: String, violations: Vec<Violation> },
    #[error(transparent)]
    Core(#[from] uvnet::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_user_error() => 1,
            _ => 2,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::InvalidSolid { .. } => "invalid_solid",
            CliError::Core(e) => core_kind(e),
            CliError::Io(_) => "io",
            CliError::Json(_) => "json",
        };
        let mut v = json!({ "error": kind, "message": self.to_string(), "exit_code": self.exit_code() });
        if let CliError::InvalidSolid { violations, .. } = self {
            v["violations"] = serde_json::to_value(violations).unwrap_or_default();
            v["invariant"] = v["violations"][0]["invariant"].clone();
        }
        v
    }
}

fn core_kind(e: &uvnet::Error) -> &'static str {
    use uvnet::Error::*;
    match e {
        Domain { .. } => "domain",
        InvalidGeometry(_) => "invalid_geometry",
        UnsupportedVariant(_) => "unsupported_variant",
        DegenerateSolid(_) => "degenerate_solid",
        InvalidSolid(_) => "invalid_solid",
        Shape(_) => "shape",
        Contract(_) => "contract",
        Config(_) => "config",
        Label { .. } => "label",
        Generation(_) => "generation",
        Format(_) => "format",
        Io(_) => "io",
        Json(_) => "json",
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser)]
#[command(name = "uvnet", version, about = "UV-Net toolkit: B-rep solids to UV-grids and graphs, training and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic extrusion dataset (container + JSON index).
    GenDataset(GenArgs),
    /// Sample B-rep JSON files into a dataset.
    Sample(SampleArgs),
    /// Train a classifier, segmenter or contrastive model.
    Train(TrainArgs),
    /// Retrain the classifier at several grid resolutions.
    Sensitivity(SensitivityArgs),
    /// Nearest-neighbour retrieval with a trained encoder.
    Retrieve(RetrieveArgs),
    /// Chordal / Bézier approximation-error report.
    AnalyzeError(AnalyzeArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generation config JSON; defaults to the four-shape preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset used without --config: `four` or `twenty`.
    #[arg(long, default_value = "four")]
    preset: String,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output prefix; writes `<out>.uvnd` and `<out>.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, num_args = 2, value_names = ["M", "N"])]
    resolution: Option<Vec<usize>>,
}

#[derive(Args)]
struct SampleArgs {
    /// B-rep JSON files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, num_args = 2, value_names = ["M", "N"])]
    resolution: Option<Vec<usize>>,
}

#[derive(Args)]
struct TrainArgs {
    /// classify | segment | clr
    #[arg(long)]
    task: String,
    /// Dataset index JSON.
    #[arg(long)]
    dataset: PathBuf,
    /// Model config JSON; defaults to the desk preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SensitivityArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    /// Square grid resolutions to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 7, 5, 3])]
    resolutions: Vec<usize>,
    /// Report JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RetrieveArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Record ids to query.
    #[arg(long, value_delimiter = ',', required = true)]
    query: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Output JSON path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// B-rep JSON files.
    files: Vec<PathBuf>,
    /// Analyze this many generated primitive solids instead of files.
    #[arg(long)]
    primitives: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, num_args = 2, value_names = ["M", "N"])]
    resolution: Option<Vec<usize>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("UVNET_THREADS") {
        log::info!("UVNET_THREADS={threads}: computation is single-threaded, value recorded only");
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim().to_string())),
    };
    let outcome = match cli.command {
        Command::GenDataset(a) => cmd_gen(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Train(a) => cmd_train(a),
        Command::Sensitivity(a) => cmd_sensitivity(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::AnalyzeError(a) => cmd_analyze(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}

fn resolution(r: &Option<Vec<usize>>) -> Option<(usize, usize)> {
    r.as_ref().map(|v| (v[0], v[1]))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn print_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_gen(a: GenArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => GenConfig::from_json(&read_text(p)?)?,
        None => match a.preset.as_str() {
            "four" => GenConfig::four_shapes(0, 50),
            "twenty" => GenConfig::twenty_shapes(0, 10),
            other => return Err(CliError::Usage(format!("unknown preset {other:?}; use four or twenty"))),
        },
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.per_class {
        cfg.per_class = n;
    }
    if let Some((m, n)) = resolution(&a.resolution) {
        cfg.sampling = SamplingConfig { surface_m: m, surface_n: n, curve_m: m, ..cfg.sampling };
    }
    cfg.validate()?;
    let ds = gen_dataset(&cfg)?;
    let index = ds.save(&a.out)?;
    print_json(&json!({ "index": index, "records": ds.len(), "classes": ds.class_names }), None)
}

fn cmd_sample(a: SampleArgs) -> Result<()> {
    let (m, n) = resolution(&a.resolution).unwrap_or((10, 10));
    let sampling = SamplingConfig::with_resolution(m, n);
    sampling.validate()?;
    let mut records = Vec::new();
    for (id, path) in a.files.iter().enumerate() {
        let solid = Solid::from_json(&read_text(path)?)?;
        let report = validate(&solid);
        if !report.is_valid() {
            return Err(CliError::InvalidSolid { path: path.display().to_string(), violations: report.violations });
        }
        let solid = normalize(&solid)?;
        let graph = sample_graph(&solid, &sampling)?;
        records.push(Record {
            id,
            class: 0,
            family: path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            face_labels: Vec::new(),
            hash: dedup_hash(&solid)?,
            graph,
            spec: None,
            solid: Some(solid),
        });
    }
    let files: Vec<String> = a.files.iter().map(|p| p.display().to_string()).collect();
    let ds = Dataset {
        records,
        sampling,
        class_names: vec!["input".into()],
        segment_names: Vec::new(),
        config: json!({ "source": "sample", "files": files, "sampling": sampling }),
    };
    let index = ds.save(&a.out)?;
    print_json(&json!({ "index": index, "records": ds.len() }), None)
}

fn model_config(path: &Option<PathBuf>) -> Result<ModelConfig> {
    Ok(match path {
        Some(p) => ModelConfig::from_json(&read_text(p)?)?,
        None => ModelConfig::desk(),
    })
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(CliError::Usage(format!("dataset index {} not found", path.display())));
    }
    Ok(Dataset::load(path)?)
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let task: Task = a.task.parse()?;
    let ds = load_dataset(&a.dataset)?;
    let base = model_config(&a.config)?;
    fs::create_dir_all(&a.out)?;
    let metrics_path = a.out.join("metrics.jsonl");
    let mut metrics = std::io::BufWriter::new(fs::File::create(&metrics_path)?);
    match task {
        Task::Classification | Task::Segmentation => {
            let classes = label_count(task, &ds);
            let model_cfg = base.with_task(task, classes);
            let defaults = TrainConfig::default();
            let cfg = TrainConfig {
                epochs: a.epochs.unwrap_or(defaults.epochs),
                batch_size: a.batch.unwrap_or(defaults.batch_size),
                lr: a.lr.unwrap_or(defaults.lr),
                seed: a.seed,
                ..defaults
            };
            let run = run_supervised(&ds, &model_cfg, &cfg, |m| {
                metrics.write_all(metrics_line(m)?.as_bytes())?;
                Ok(())
            })?;
            metrics.flush()?;
            run.model.save_file(&a.out.join("model.uvnc"))?;
            print_json(&run.summary, Some(&a.out.join("summary.json")))?;
            print_json(&run.summary, None)
        }
        Task::Contrastive => {
            let model_cfg = base.with_task(task, 0);
            let defaults = ClrConfig::default();
            let cfg = ClrConfig {
                epochs: a.epochs.unwrap_or(defaults.epochs),
                batch_size: a.batch.unwrap_or(defaults.batch_size),
                lr: a.lr.unwrap_or(defaults.lr),
                seed: a.seed,
                ..defaults
            };
            let mut model = UvNet::new(model_cfg, a.seed)?;
            let history = train_clr(&mut model, &ds, &cfg, |e| {
                metrics.write_all((serde_json::to_string(e)? + "\n").as_bytes())?;
                Ok(())
            })?;
            metrics.flush()?;
            model.save_file(&a.out.join("model.uvnc"))?;
            let index = EmbeddingIndex::build(&mut model, &ds, 64)?;
            index.save(&a.out.join("embeddings.json"))?;
            let x: Vec<Vec<f64>> = index.entries.iter().map(|e| e.vector.clone()).collect();
            let y: Vec<usize> = index.entries.iter().map(|e| e.class).collect();
            let report = evaluate_embeddings(&x, &y, ds.class_count(), a.seed)?;
            let (pos, neg) = pair_cosines(&mut model, &ds, cfg.batch_size, a.seed)?;
            let summary = json!({
                "format_version": uvnet::train::METRICS_FORMAT_VERSION,
                "task": task,
                "config_hash": config_hash(&json!({ "model": model.config, "train": cfg })),
                "dataset_hash": config_hash(&ds.config),
                "epochs_run": history.len(),
                "final_loss": history.last().map(|e| e.loss),
                "uniform_baseline": history.last().map(|e| e.uniform_baseline),
                "positive_cosine": pos,
                "negative_cosine": neg,
                "evaluation": report,
            });
            print_json(&report, Some(&a.out.join("eval_report.json")))?;
            print_json(&summary, Some(&a.out.join("summary.json")))?;
            print_json(&summary, None)
        }
    }
}

fn cmd_sensitivity(a: SensitivityArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let model_cfg = model_config(&a.config)?.with_task(Task::Classification, ds.class_count());
    let defaults = TrainConfig::default();
    let cfg = TrainConfig { epochs: a.epochs.unwrap_or(defaults.epochs), batch_size: a.batch.unwrap_or(defaults.batch_size), seed: a.seed, ..defaults };
    let report = sensitivity(&ds, &model_cfg, &cfg, &a.resolutions)?;
    print_json(&report, Some(&a.out))?;
    print_json(&report, None)
}

fn cmd_retrieve(a: RetrieveArgs) -> Result<()> {
    if !a.checkpoint.exists() {
        return Err(CliError::Usage(format!("checkpoint {} not found", a.checkpoint.display())));
    }
    let mut model = UvNet::load_file(&a.checkpoint)?;
    let ds = load_dataset(&a.dataset)?;
    let index = EmbeddingIndex::build(&mut model, &ds, 64)?;
    let mut results = Vec::new();
    for q in &a.query {
        let v = index.vector(*q).ok_or_else(|| CliError::Usage(format!("query id {q} is not in the dataset")))?;
        results.push(json!({ "query": q, "hits": retrieve(v, &index, a.k)? }));
    }
    print_json(&json!({ "k": a.k, "results": results }), a.out.as_deref())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let (m, n) = resolution(&a.resolution).unwrap_or((10, 10));
    let solids: Vec<Solid> = match a.primitives {
        Some(count) => primitive_corpus(a.seed, count)?,
        None if a.files.is_empty() => return Err(CliError::Usage("give B-rep files or --primitives N".into())),
        None => {
            let mut out = Vec::new();
            for path in &a.files {
                let solid = Solid::from_json(&read_text(path)?)?;
                let report = validate(&solid);
                if !report.is_valid() {
                    return Err(CliError::InvalidSolid { path: path.display().to_string(), violations: report.violations });
                }
                out.push(normalize(&solid)?);
            }
            out
        }
    };
    let mut samples = ErrorSamples::default();
    for s in &solids {
        samples.extend(error_samples(s, m, n)?);
    }
    let report = samples.report();
    eprint!("{}", report.table());
    print_json(&json!({ "solids": solids.len(), "resolution": [m, n], "report": report }), a.out.as_deref())
}
