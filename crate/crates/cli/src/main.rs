//! `arena`: pipelines over the evaluation kernels and the annotation service.
//!
//! Exit status is 0 on success, 2 for invalid input or usage, 1 otherwise.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "arena", version, about = "Arena-style evaluation of music generation systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate track metadata, print a per-genre summary and optionally prepare audio.
    Ingest(IngestArgs),
    /// Song-disjoint train/test split.
    Split(SplitArgs),
    /// Training prompts and Recall/Analysis/Creativity evaluation queries.
    Prompts(PromptsArgs),
    /// Append a batch of pairwise matches to a service data root.
    Schedule(ScheduleArgs),
    /// Run the annotation HTTP service.
    Serve(ServeArgs),
    /// ELO leaderboard replayed from an annotation log.
    Elo(EloArgs),
    /// Inter-annotator agreement over phase-1 double annotations.
    Iaa(IaaArgs),
    /// FAD, FD, KLD and PSNR for one system.
    Metrics(MetricsArgs),
    /// Regional and genre census of music datasets.
    Disparity(DisparityArgs),
    /// Train a bottleneck adapter on paired feature matrices.
    AdapterTrain(AdapterTrainArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Line-delimited track metadata.
    #[arg(long)]
    metadata: PathBuf,
    /// Write the validated metadata here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root that `audio_path` entries are relative to. Enables audio preparation.
    #[arg(long, requires = "out_audio")]
    audio_root: Option<PathBuf>,
    /// Directory for prepared clips, one `<id>.wav` per track.
    #[arg(long, requires = "audio_root")]
    out_audio: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    max_seconds: f64,
    #[arg(long, default_value_t = 32_000)]
    sample_rate: u32,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[arg(long)]
    metadata: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long)]
    seed: u64,
    /// Write the split (ids, songs, hours) as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PromptsArgs {
    #[arg(long)]
    metadata: PathBuf,
    /// Split JSON from `arena split`. Without it every track counts as training.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Template file. Defaults to the built-in templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Foreign attribute pools (JSON); required when --creativity > 0.
    #[arg(long)]
    foreign: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    recall: usize,
    #[arg(long, default_value_t = 0)]
    analysis: usize,
    #[arg(long, default_value_t = 0)]
    creativity: usize,
    /// Prepended to query ids, e.g. `hc` gives `hc-recall-001`.
    #[arg(long)]
    id_prefix: Option<String>,
    #[arg(long)]
    seed: u64,
    /// Evaluation queries (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Training prompts (JSONL), one per training track.
    #[arg(long)]
    training_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    #[arg(long, env = "ARENA_DATA_DIR")]
    data_dir: PathBuf,
    /// Evaluation queries (JSONL) from `arena prompts`.
    #[arg(long)]
    queries: PathBuf,
    /// Comma-separated system pairs, e.g. `MGB:MTB,MGB:MGF`.
    #[arg(long, value_delimiter = ',', required = true)]
    pairs: Vec<String>,
    #[arg(long)]
    queries_per_type: usize,
    /// Comma-separated subset of recall,analysis,creativity.
    #[arg(long, value_delimiter = ',', default_value = "recall,analysis,creativity")]
    query_types: Vec<String>,
    #[arg(long, default_value_t = 0)]
    query_offset: usize,
    #[arg(long)]
    phase: u8,
    #[arg(long)]
    annotators_per_match: u8,
    /// Genre stamped on every match. Defaults to each query's own genre.
    #[arg(long)]
    genre: Option<String>,
    #[arg(long)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "ARENA_DATA_DIR")]
    data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Built UI to serve at `/`.
    #[arg(long)]
    ui_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Amendments {
    Ignore,
    Replace,
}

#[derive(Debug, Args)]
struct EloArgs {
    /// Annotation log (JSONL).
    #[arg(long)]
    log: PathBuf,
    /// OA, Inst, MC, RC, CR or `all`.
    #[arg(long)]
    criterion: String,
    /// Recall, Analysis, Creativity or `all`.
    #[arg(long, default_value = "all")]
    query_type: String,
    #[arg(long)]
    genre: Option<String>,
    #[arg(long, value_enum, default_value_t = Amendments::Ignore)]
    amendments: Amendments,
    #[arg(long, default_value_t = 15.0)]
    k_factor: f64,
    #[arg(long, default_value_t = 1500.0)]
    initial_rating: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Metric {
    Distance,
    Direction,
}

#[derive(Debug, Args)]
struct IaaArgs {
    #[arg(long)]
    log: PathBuf,
    #[arg(long, value_enum)]
    metric: Metric,
    /// OA, Inst, MC, RC, CR or `all`.
    #[arg(long, default_value = "all")]
    criterion: String,
    #[arg(long)]
    genre: Option<String>,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    #[arg(long)]
    system: String,
    /// Reference embeddings for FAD (EMB1, CSV or TSV).
    #[arg(long, requires = "fad_gen")]
    fad_ref: Option<PathBuf>,
    #[arg(long, requires = "fad_ref")]
    fad_gen: Option<PathBuf>,
    #[arg(long, requires = "fd_gen")]
    fd_ref: Option<PathBuf>,
    #[arg(long, requires = "fd_ref")]
    fd_gen: Option<PathBuf>,
    /// Reference classifier logits, rows keyed by prompt id when labelled.
    #[arg(long, requires = "logits_gen")]
    logits_ref: Option<PathBuf>,
    #[arg(long, requires = "logits_ref")]
    logits_gen: Option<PathBuf>,
    #[arg(long, requires = "features_gen")]
    features_ref: Option<PathBuf>,
    #[arg(long, requires = "features_ref")]
    features_gen: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
    #[arg(long, default_value_t = 1e-7)]
    kl_eps: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Section {
    Regions,
    Genres,
    Rollup,
    Excluded,
    All,
}

#[derive(Debug, Args)]
struct DisparityArgs {
    /// Dataset descriptors (JSONL).
    #[arg(long)]
    datasets: PathBuf,
    #[arg(long, value_enum, default_value_t = Section::All)]
    section: Section,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VariantArg {
    Dense,
    Conv1x1,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
struct AdapterTrainArgs {
    /// Input features, one row per position.
    #[arg(long)]
    input: PathBuf,
    /// Target features, same shape as the input.
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Dense)]
    variant: VariantArg,
    #[arg(long, default_value_t = 4)]
    reduction_factor: usize,
    #[arg(long)]
    steps: usize,
    #[arg(long, default_value_t = 5e-5)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 0.05)]
    weight_decay: f64,
    /// Global gradient-norm cap; 0 disables clipping.
    #[arg(long, default_value_t = 1.0)]
    max_grad_norm: f64,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    precision: Precision,
    #[arg(long)]
    seed: u64,
    /// Write the trained weights here (plus `<path>.index.json`).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    tracing_subscriber::fmt().with_writer(std::io::stderr).with_env_filter(
        tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
    ).init();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
