use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use maats_core::{MqmCategory, SystemKind};

#[derive(Debug, Parser)]
#[command(
    name = "maats",
    version,
    about = "Multi-agent MQM translation pipeline and evaluation bench"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store root; overrides the config file.
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a dataset with one approach and persist the records.
    Run(RunArgs),
    /// Metric and significance tables over stored runs.
    Eval(EvalArgs),
    /// Per-category TP/FP/FN against gold annotations.
    Confusion(ConfusionArgs),
    /// Serve the ranking API for anonymized side-by-side judgments.
    RankServe(RankServeArgs),
    /// Resolve ballots and write the Borda report.
    RankExport(RankExportArgs),
    /// Write the prompt templates to a directory.
    DumpPrompts(DumpPromptsArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub approach: SystemKind,
    #[arg(long)]
    pub model: String,
    /// Language pair such as `en-de`.
    #[arg(long)]
    pub pair: String,
    /// JSONL dataset of `{id, source, reference?}` records.
    #[arg(long, conflicts_with_all = ["source", "references", "ids"], required_unless_present = "source")]
    pub dataset: Option<PathBuf>,
    /// Plain-text source file, one segment per line.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Line-aligned reference translations.
    #[arg(long, requires = "source")]
    pub references: Option<PathBuf>,
    /// Line-aligned segment ids.
    #[arg(long, requires = "source")]
    pub ids: Option<PathBuf>,
    /// Defaults to `<src>-<tgt>-<model>-<approach>`.
    #[arg(long)]
    pub run_id: Option<String>,
    /// Continue an existing run, skipping recorded segments.
    #[arg(long)]
    pub resume: bool,
    /// Segments in flight.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Evaluator calls in flight per segment.
    #[arg(long)]
    pub evaluator_concurrency: Option<usize>,
    /// Fail a segment when any evaluator fails.
    #[arg(long)]
    pub strict: bool,
    /// Evaluator categories, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub categories: Vec<MqmCategory>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Answer every model from this replay file instead of the configured providers.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    /// External segment scores as `RUN_ID=PATH`.
    #[arg(long = "scores")]
    pub scores: Vec<String>,
    /// Directory for the TSV tables; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub fluency_label: bool,
    #[arg(long)]
    pub resamples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ConfusionArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    /// A match also needs equal severity.
    #[arg(long)]
    pub severity_aware: bool,
    #[arg(long)]
    pub fluency_label: bool,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankServeArgs {
    /// Completed runs; each model needs one run per approach over the same dataset.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    #[arg(long)]
    pub session: String,
    /// Annotator ids allowed to request tasks.
    #[arg(long = "annotator", required = true)]
    pub annotators: Vec<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Built UI assets served at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankExportArgs {
    #[arg(long)]
    pub session: String,
    /// Directory for the ballot dump and Borda tables; stdout JSON only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DumpPromptsArgs {
    #[arg(long)]
    pub out: PathBuf,
}
