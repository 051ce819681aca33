//! The `vessel-bench` command line.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dataset::{ChipSet, Manifest, ManifestEntry};
use crate::error::{Error, Result};
use crate::harness::{
    render_report, run::extract, run_experiment, ExperimentConfig, ExperimentReport, FeatureCache,
    MethodSpec, ReportFormat, TrainedPipeline,
};
use crate::image::{
    align_chip, load_png, panchromatic_simulate, quantize_u8, save_png, PanchroParams,
};
use crate::synth::{
    domain_shift_config, generate_dataset, GenerateOptions, RenderConstants, ShiftId, MANIFEST_FILE,
};

pub const PROVENANCE_FILE: &str = "provenance.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const REPORT_FILE: &str = "report.md";
pub const FEATURES_FILE: &str = "features.csv";
pub const EVAL_FILE: &str = "eval.json";

#[derive(Debug, Parser)]
#[command(
    name = "vessel-bench",
    version,
    about = "Classical vessel chip classification benchmark"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Progress messages on stderr; repeat for more.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic dataset to PNG chips and a manifest.
    Generate(GenerateArgs),
    /// Panchromatize, align and resize the chips of a manifest.
    Preprocess(PreprocessArgs),
    /// Write descriptors of every chip of a manifest to CSV.
    Extract(ExtractArgs),
    /// Fit a method on a whole manifest and save it.
    Train(TrainArgs),
    /// Score a saved method on a manifest.
    Eval(EvalArgs),
    /// Run a full experiment config: benchmark grid and adaptation study.
    Experiment(ExperimentArgs),
    /// Render a runs CSV as tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Render constants JSON (built-in defaults when absent).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Apply a domain shift (A or B) to the constants.
    #[arg(long)]
    shift: Option<ShiftId>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PreprocessArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Side of the aligned output chips.
    #[arg(long, default_value_t = 128)]
    size: usize,
    /// Panchromatic parameters JSON for RGB inputs.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MethodArgs {
    /// Method name such as hog+src.
    #[arg(long, conflicts_with = "config")]
    method: Option<MethodSpec>,
    /// Method spec JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl MethodArgs {
    fn resolve(&self) -> Result<MethodSpec> {
        let m = match (&self.method, &self.config) {
            (Some(m), _) => m.clone(),
            (None, Some(p)) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                serde_json::from_str(&text).map_err(|source| Error::Json {
                    context: p.display().to_string(),
                    source,
                })?
            }
            (None, None) => return Err(Error::invalid("either --method or --config is required")),
        };
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    method: MethodArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Directory written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment config JSON (the built-in default grid when absent).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    size: Option<usize>,
    /// Format of the table printed to stdout.
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Runs CSV written by `experiment`.
    #[arg(long)]
    runs: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be positive");
            return 1;
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match pool.install(|| dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    let log = |msg: String| {
        if cli.verbose > 0 {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Generate(a) => generate(a, log),
        Command::Preprocess(a) => preprocess(a, log),
        Command::Extract(a) => extract_features(a, log),
        Command::Train(a) => train(a, log),
        Command::Eval(a) => eval(a),
        Command::Experiment(a) => experiment(a, log),
        Command::Report(a) => report(a),
    }
}

#[derive(Serialize)]
struct Provenance<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config_hash: String,
    master_seed: Option<u64>,
    /// Everything else needed to rerun the job.
    inputs: serde_json::Value,
}

fn write_provenance(
    out: &Path,
    command: &str,
    config_hash: String,
    master_seed: Option<u64>,
    inputs: serde_json::Value,
) -> Result<()> {
    let p = Provenance {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        config_hash,
        master_seed,
        inputs,
    };
    let path = out.join(PROVENANCE_FILE);
    let text = serde_json::to_string_pretty(&p).expect("provenance serializes") + "\n";
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(sha256_hex(&fs::read(path).map_err(|e| Error::io(path, e))?))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cache() -> Result<FeatureCache> {
    FeatureCache::from_env(None)
}

fn generate(a: &GenerateArgs, log: impl Fn(String)) -> Result<()> {
    let base = match &a.config {
        Some(p) => RenderConstants::load(p)?,
        None => RenderConstants::default(),
    };
    let constants = match a.shift {
        Some(id) => domain_shift_config(&base, id)?,
        None => base,
    };
    let opts = GenerateOptions {
        constants,
        ..GenerateOptions::new(a.seed, a.per_class, a.size)
    };
    create_dir(&a.out)?;
    let manifest = generate_dataset(&opts, &a.out)?;
    log(format!(
        "wrote {} chips, manifest {}",
        4 * a.per_class,
        manifest.display()
    ));
    write_provenance(
        &a.out,
        "generate",
        opts.constants.sha256(),
        Some(a.seed),
        serde_json::json!({ "per_class": a.per_class, "size": a.size, "shift": a.shift }),
    )
}

fn preprocess(a: &PreprocessArgs, log: impl Fn(String)) -> Result<()> {
    use rayon::prelude::*;

    let panchro = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<PanchroParams>(&text).map_err(|source| Error::Json {
                context: p.display().to_string(),
                source,
            })?
        }
        None => PanchroParams::default(),
    };
    let input = Manifest::read(&a.manifest)?;
    let root = a
        .manifest
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    create_dir(&a.out.join("chips"))?;
    let entries = input
        .entries
        .par_iter()
        .map(|e| {
            let src = root.join(&e.path);
            let mut chip = load_png(&src)?;
            if chip.channels() == 3 {
                chip = panchromatic_simulate(&chip, &panchro)?;
            }
            let chip = quantize_u8(&align_chip(&chip, a.size, a.size)?);
            let name = Path::new(&e.path).file_name().ok_or_else(|| {
                Error::invalid(format!("manifest path '{}' has no file name", e.path))
            })?;
            let path = format!("chips/{}", name.to_string_lossy());
            save_png(&chip, &a.out.join(&path))
                .map_err(|err| err.context(src.display().to_string()))?;
            Ok(ManifestEntry {
                path,
                width: a.size,
                height: a.size,
                ..e.clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let source_hash = file_hash(&a.manifest)?;
    let mut comments = input.comments.clone();
    comments.push(format!(
        "preprocessed from sha256={source_hash} size={}",
        a.size
    ));
    Manifest { comments, entries }.write(&a.out.join(MANIFEST_FILE))?;
    log(format!("aligned {} chips", input.entries.len()));
    write_provenance(
        &a.out,
        "preprocess",
        source_hash,
        None,
        serde_json::json!({ "manifest": a.manifest, "size": a.size, "panchro": panchro }),
    )
}

fn extract_features(a: &ExtractArgs, log: impl Fn(String)) -> Result<()> {
    let method = a.method.resolve()?;
    let data = ChipSet::load(&a.manifest)?;
    let features = extract(&method, &data, &cache()?)?;
    create_dir(&a.out)?;
    let path = a.out.join(FEATURES_FILE);
    let csv_err = |source| Error::Csv {
        path: path.clone(),
        source,
    };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    let dim = features.first().map_or(0, Vec::len);
    let header = ["id".to_string(), "label".to_string()]
        .into_iter()
        .chain((0..dim).map(|i| format!("f{i}")));
    w.write_record(header).map_err(csv_err)?;
    for ((id, label), f) in data.ids.iter().zip(&data.labels).zip(&features) {
        let row = [id.clone(), label.to_string()]
            .into_iter()
            .chain(f.iter().map(|v| v.to_string()));
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    log(format!("{} descriptors of length {dim}", features.len()));
    write_provenance(
        &a.out,
        "extract",
        file_hash(&a.manifest)?,
        None,
        serde_json::json!({ "manifest": a.manifest, "method": method }),
    )
}

fn train(a: &TrainArgs, log: impl Fn(String)) -> Result<()> {
    let method = a.method.resolve()?;
    let data = ChipSet::load(&a.manifest)?;
    let pipeline = TrainedPipeline::fit(&method, &data, &cache()?)?;
    pipeline.save(&a.out)?;
    log(format!("trained {method} on {} chips", data.len()));
    write_provenance(
        &a.out,
        "train",
        file_hash(&a.manifest)?,
        None,
        serde_json::json!({ "manifest": a.manifest, "method": method }),
    )
}

#[derive(Serialize)]
struct EvalSummary {
    method: String,
    samples: usize,
    accuracy: f64,
    confusion: Vec<Vec<usize>>,
}

fn eval(a: &EvalArgs) -> Result<()> {
    let pipeline = TrainedPipeline::load(&a.model)?;
    let data = ChipSet::load(&a.manifest)?;
    let out = pipeline.score(&data, &cache()?)?;
    let summary = EvalSummary {
        method: pipeline.method.name(),
        samples: data.len(),
        accuracy: out.accuracy,
        confusion: out.confusion,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    print!("{text}");
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let path = dir.join(EVAL_FILE);
        fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
        write_provenance(
            dir,
            "eval",
            file_hash(&a.manifest)?,
            None,
            serde_json::json!({ "manifest": a.manifest, "model": a.model }),
        )?;
    }
    Ok(())
}

fn experiment(a: &ExperimentArgs, log: impl Fn(String)) -> Result<()> {
    let (mut config, base_dir) = match &a.config {
        Some(p) => (
            ExperimentConfig::load(p)?,
            p.parent().map(Path::to_path_buf).unwrap_or_default(),
        ),
        None => (ExperimentConfig::default_grid(42), PathBuf::from(".")),
    };
    if let Some(seed) = a.seed {
        config.reseed(seed);
    }
    config.resize(a.per_class, a.size);
    config.validate()?;
    create_dir(&a.out)?;
    let resolved = a.out.join("config.json");
    fs::write(&resolved, config.to_json() + "\n").map_err(|e| Error::io(&resolved, e))?;
    log(format!("running experiment {}", config.hash()));

    let report = run_experiment(&config, &base_dir, &cache()?)?;
    let write = |name: &str, text: &str| {
        let path = a.out.join(name);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    };
    write(RUNS_FILE, &report.to_csv())?;
    write(REPORT_FILE, &report.to_markdown())?;
    write_provenance(
        &a.out,
        "experiment",
        config.hash(),
        Some(config.master_seed),
        serde_json::json!({ "config": a.config, "resolved_config": "config.json" }),
    )?;
    let table = match a.format {
        ReportFormat::Csv => report.to_csv(),
        ReportFormat::Markdown => report.to_markdown(),
    };
    std::io::stdout()
        .write_all(table.as_bytes())
        .map_err(|e| Error::io(Path::new("<stdout>"), e))
}

fn report(a: &ReportArgs) -> Result<()> {
    let report = ExperimentReport::load_csv(&a.runs)?;
    let text = render_report(&report, a.format)?;
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io(Path::new("<stdout>"), e)),
    }
}
