//! Command-line front end: learn, apply, evaluate, synth, export-curves.
//!
//! Exit codes: 0 on success, 1 when some files failed but the run finished
//! (or was aborted by per-file failures), 2 on configuration/usage errors.

use clap::{Args, Parser, Subcommand, ValueEnum};
use mhm::pipeline::{self, ingest_dirs, ingest_manifest, JobConfig, PairManifest};
use mhm::synth::DegradationSpec;
use mhm::{document, Error};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "mhm",
    version,
    about = "Restore color-shifted photo collections with median histogram matching"
)]
struct Cli {
    /// Worker threads (default: MHM_WORKERS or all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Optional TOML config file with default tuning values
    /// (quantiles, grid, bins, workers, seed); flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// More logging (-v: debug, -vv: trace)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

/// Values a `--config` file may provide; any flag overrides its entry.
#[derive(Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    quantiles: Option<usize>,
    grid: Option<usize>,
    bins: Option<usize>,
    workers: Option<usize>,
    seed: Option<u64>,
}

impl ConfigFile {
    fn load(path: Option<&PathBuf>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let text = std::fs::read_to_string(path).map_err(|source| Error::FileRead {
            path: path.clone(),
            source,
        })?;
        toml::from_str(&text).map_err(|e| Error::InvalidParameter {
            name: "config",
            reason: e.to_string(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Learn a median transform from damaged/reference scan pairs
    Learn(LearnArgs),
    /// Apply a transform document to a batch of images
    Apply(ApplyArgs),
    /// Evaluate a training corpus or a corrected collection
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
    /// Degrade clean images through a known curve triple, with ground truth
    Synth(SynthArgs),
    /// Re-export curve CSVs and the SVG from a transform document
    ExportCurves(ExportArgs),
}

#[derive(Args)]
struct CorpusArgs {
    /// Directory of damaged scans (pairs with --reference by file stem)
    #[arg(long, requires = "reference", conflicts_with = "manifest")]
    damaged: Option<PathBuf>,

    /// Directory of reference scans
    #[arg(long, requires = "damaged", conflicts_with = "manifest")]
    reference: Option<PathBuf>,

    /// CSV manifest with header id,damaged,reference
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl CorpusArgs {
    fn resolve(&self) -> Result<PairManifest, Error> {
        match (&self.manifest, &self.damaged, &self.reference) {
            (Some(m), None, None) => ingest_manifest(m),
            (None, Some(d), Some(r)) => ingest_dirs(d, r),
            _ => Err(Error::InvalidParameter {
                name: "corpus",
                reason: "give either --manifest or both --damaged and --reference".into(),
            }),
        }
    }
}

#[derive(Args)]
struct TuningArgs {
    /// Quantile intervals used for percentile matching [default: 256]
    #[arg(short = 'K', long = "quantiles")]
    quantiles: Option<usize>,

    /// Grid intervals of the learned transforms [default: 255]
    #[arg(short = 'G', long = "grid")]
    grid: Option<usize>,

    /// Histogram bins for the weighted metric [default: 256]
    #[arg(short = 'B', long = "bins")]
    bins: Option<usize>,
}

impl TuningArgs {
    fn config(&self, out: &std::path::Path, shared: &SharedConfig) -> JobConfig {
        let mut config = JobConfig::new(out);
        config.quantile_intervals = self.quantiles.or(shared.file.quantiles).unwrap_or(256);
        config.grid_size = self.grid.or(shared.file.grid).unwrap_or(255);
        config.density_bins = self.bins.or(shared.file.bins).unwrap_or(256);
        if let Some(w) = shared.workers() {
            config.workers = w;
        }
        config
    }
}

/// Global flags merged with the optional config file.
struct SharedConfig {
    workers_flag: Option<usize>,
    file: ConfigFile,
}

impl SharedConfig {
    /// Flag wins over the config file; the library falls back to the
    /// environment and the core count when this is `None`.
    fn workers(&self) -> Option<usize> {
        self.workers_flag.or(self.file.workers)
    }
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    corpus: CorpusArgs,

    #[command(flatten)]
    tuning: TuningArgs,

    /// Output directory for transform.json, curve CSVs, and curves.svg
    #[arg(short, long)]
    out: PathBuf,

    /// RFC 3339 timestamp to record in the document
    /// (default: SOURCE_DATE_EPOCH if set, else the current time)
    #[arg(long)]
    timestamp: Option<String>,
}

#[derive(Args)]
struct ApplyArgs {
    /// Transform document produced by `learn`
    #[arg(short, long)]
    transform: PathBuf,

    /// Output directory; files keep their original names
    #[arg(short, long)]
    out: PathBuf,

    /// Replace existing outputs instead of skipping them
    #[arg(long)]
    overwrite: bool,

    /// Image files and/or directories to restore
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum EvaluateCommand {
    /// Leave-one-out cross-validation over a training corpus
    Loo(LooArgs),
    /// Per-pixel perceptual distances against independently edited images
    Compare(CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightSourceArg {
    /// Weight by each damaged image's own intensity distribution
    Damaged,
    /// Weight by the reference image's distribution instead
    Reference,
}

#[derive(Args)]
struct LooArgs {
    #[command(flatten)]
    corpus: CorpusArgs,

    #[command(flatten)]
    tuning: TuningArgs,

    /// Image whose density weights the weighted metric
    #[arg(long, value_enum, default_value_t = WeightSourceArg::Damaged)]
    weight_source: WeightSourceArg,

    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report_format: ReportFormat,

    /// Also write report.txt and report.json into this directory
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Uncorrected originals
    #[arg(long)]
    originals: PathBuf,

    /// Independently edited reference images (matched by file stem)
    #[arg(long)]
    edited: PathBuf,

    /// Output of `apply` on the originals
    #[arg(long)]
    corrected: PathBuf,

    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    report_format: ReportFormat,

    /// Also write report.txt and report.json into this directory
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory of clean images to degrade
    #[arg(long)]
    clean: PathBuf,

    /// Output directory for degraded copies and ground-truth documents
    #[arg(short, long)]
    out: PathBuf,

    /// Dye-curve exponent per channel (> 1 suppresses the dye)
    #[arg(long, default_value_t = 1.0)]
    cyan_gamma: f64,

    #[arg(long, default_value_t = 1.0)]
    magenta_gamma: f64,

    #[arg(long, default_value_t = 1.0)]
    yellow_gamma: f64,

    /// Per-image log-space exponent jitter bound (0 = identical curves)
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,

    /// Seed for the jitter [default: 0]
    #[arg(long)]
    seed: Option<u64>,

    /// Grid intervals of the emitted ground-truth documents [default: 255]
    #[arg(short = 'G', long = "grid")]
    grid: Option<usize>,

    #[arg(long)]
    overwrite: bool,
}

#[derive(Args)]
struct ExportArgs {
    /// Transform document to read
    #[arg(short, long)]
    transform: PathBuf,

    /// Output directory for the CSVs and SVG
    #[arg(short, long)]
    out: PathBuf,
}

fn exit_code_for(error: &Error) -> u8 {
    match error {
        Error::InvalidParameter { .. }
        | Error::Manifest(_)
        | Error::NoPairs
        | Error::MalformedDocument(_)
        | Error::UnsupportedVersion { .. }
        | Error::NonMonotone { .. }
        | Error::UnpinnedEndpoint { .. }
        | Error::OutputOutOfRange { .. }
        | Error::GridMismatch { .. } => 2,
        _ => 1,
    }
}

fn default_timestamp() -> String {
    if let Ok(epoch) = std::env::var("SOURCE_DATE_EPOCH") {
        if let Ok(secs) = epoch.parse::<i64>() {
            if let Some(dt) = chrono::DateTime::from_timestamp(secs, 0) {
                return dt.to_rfc3339();
            }
        }
    }
    chrono::Utc::now().to_rfc3339()
}

fn run_learn(args: LearnArgs, shared: &SharedConfig) -> Result<u8, Error> {
    let manifest = args.corpus.resolve()?;
    let mut config = args.tuning.config(&args.out, shared);
    config.timestamp = Some(args.timestamp.unwrap_or_else(default_timestamp));
    let outcome = pipeline::learn(&manifest, &config)?;
    println!(
        "learned median of {} pair estimate(s)",
        outcome.estimates.len()
    );
    println!("transform: {}", outcome.document_path.display());
    for path in &outcome.csv_paths {
        println!("curve:     {}", path.display());
    }
    println!("plot:      {}", outcome.svg_path.display());
    if outcome.failures.is_empty() {
        Ok(0)
    } else {
        eprintln!("{} pair(s) failed", outcome.failures.len());
        Ok(1)
    }
}

fn run_apply(args: ApplyArgs, shared: &SharedConfig) -> Result<u8, Error> {
    let transform = document::read_document(&args.transform)?;
    let mut config = JobConfig::new(&args.out);
    if let Some(w) = shared.workers() {
        config.workers = w;
    }
    config.overwrite = args.overwrite;
    let outcome = pipeline::apply_batch(&args.inputs, &transform, &config)?;
    println!(
        "restored {} image(s), skipped {}, failed {}",
        outcome.written.len(),
        outcome.skipped.len(),
        outcome.failures.len()
    );
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

fn emit_report(
    format: ReportFormat,
    out: Option<&PathBuf>,
    table: String,
    json: String,
) -> Result<(), Error> {
    match format {
        ReportFormat::Text => print!("{table}"),
        ReportFormat::Json => println!("{json}"),
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.txt"), &table)?;
        std::fs::write(dir.join("report.json"), &json)?;
        eprintln!("reports written to {}", dir.display());
    }
    Ok(())
}

fn run_loo(args: LooArgs, shared: &SharedConfig) -> Result<u8, Error> {
    let manifest = args.corpus.resolve()?;
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut config = args.tuning.config(&out_dir, shared);
    config.weight_source = match args.weight_source {
        WeightSourceArg::Damaged => mhm::evaluation::WeightSource::Damaged,
        WeightSourceArg::Reference => mhm::evaluation::WeightSource::Reference,
    };
    let outcome = pipeline::evaluate_loo(&manifest, &config)?;
    let json =
        serde_json::to_string_pretty(&outcome.report).expect("report serialization cannot fail");
    emit_report(
        args.report_format,
        args.out.as_ref(),
        outcome.report.to_table(),
        json,
    )?;
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

fn run_compare(args: CompareArgs, shared: &SharedConfig) -> Result<u8, Error> {
    let out_dir = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut config = JobConfig::new(out_dir);
    if let Some(w) = shared.workers() {
        config.workers = w;
    }
    let outcome =
        pipeline::evaluate_compare(&args.originals, &args.edited, &args.corrected, &config)?;
    let json =
        serde_json::to_string_pretty(&outcome.report).expect("report serialization cannot fail");
    emit_report(
        args.report_format,
        args.out.as_ref(),
        outcome.report.to_table(),
        json,
    )?;
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

fn run_synth(args: SynthArgs, shared: &SharedConfig) -> Result<u8, Error> {
    let spec = DegradationSpec::new([args.cyan_gamma, args.magenta_gamma, args.yellow_gamma])?;
    let mut config = JobConfig::new(&args.out);
    config.grid_size = args.grid.or(shared.file.grid).unwrap_or(255);
    config.seed = args.seed.or(shared.file.seed).unwrap_or(0);
    config.overwrite = args.overwrite;
    if let Some(w) = shared.workers() {
        config.workers = w;
    }
    let outcome = pipeline::synthesize(&[args.clean], &spec, args.jitter, &config)?;
    println!(
        "degraded {} image(s), skipped {}, failed {}",
        outcome.degraded.len(),
        outcome.skipped.len(),
        outcome.failures.len()
    );
    println!("applied curve:    {}", outcome.degradation_doc.display());
    println!("correction truth: {}", outcome.correction_doc.display());
    Ok(if outcome.failures.is_empty() { 0 } else { 1 })
}

fn run_export(args: ExportArgs) -> Result<u8, Error> {
    let (csv_paths, svg_path) = pipeline::export_curves(&args.transform, &args.out)?;
    for path in csv_paths {
        println!("curve: {}", path.display());
    }
    println!("plot:  {}", svg_path.display());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let shared = match ConfigFile::load(cli.config.as_ref()) {
        Ok(file) => SharedConfig {
            workers_flag: cli.workers,
            file,
        },
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = match cli.command {
        Command::Learn(args) => run_learn(args, &shared),
        Command::Apply(args) => run_apply(args, &shared),
        Command::Evaluate(EvaluateCommand::Loo(args)) => run_loo(args, &shared),
        Command::Evaluate(EvaluateCommand::Compare(args)) => run_compare(args, &shared),
        Command::Synth(args) => run_synth(args, &shared),
        Command::ExportCurves(args) => run_export(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
