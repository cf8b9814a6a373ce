//! `labelflow`: synthesize cohorts, run labeling tasks, score them and serve
//! the adjudication API.

mod commands;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "labelflow", version, about = "Outcome-labeling agent harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort: patient store, truth manifest, baseline labels.
    Synth(SynthArgs),
    /// Run a labeling task over every patient in a cohort.
    Run(RunArgs),
    /// Score tier-1 answers against the store.
    EvalTier1(EvalTier1Args),
    /// Before/after confusion metrics against baseline labels and verdicts.
    EvalTier2(EvalTier2Args),
    /// Precision, recall, F1 and accuracy for raw confusion counts.
    Metrics(MetricsArgs),
    /// Drop the leading digits of course ids in chosen tier-1 answers.
    PlantTier1Bug(PlantArgs),
    /// Serve the adjudication HTTP API for a finished run.
    Serve(ServeArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    /// tier1_qa, orn, prostate_recurrence or hn_recurrence
    #[arg(long)]
    pub task: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cohort size; tier-1 cohorts only.
    #[arg(long)]
    pub patients: Option<usize>,
    /// Cohort spec JSON; replaces the task defaults.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Scripted,
    Http,
}

#[derive(Args)]
pub struct RunArgs {
    /// tier1_qa, orn, recurrence, prostate_recurrence or hn_recurrence
    #[arg(long)]
    pub task: Option<String>,
    /// Directory of patient JSON files.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Truth manifest; fixes the patient list and drives the scripted backend.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Scripted-backend behavior JSON (latency, failures, prose-only patients).
    #[arg(long)]
    pub behavior: Option<PathBuf>,
    /// `http` reads MODEL_ENDPOINT, MODEL_KEY and MODEL_NAME.
    #[arg(long, value_enum, default_value = "scripted")]
    pub backend: Backend,
    #[arg(long, default_value_t = 4)]
    pub concurrency: usize,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Recorded in the run manifest.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct EvalTier1Args {
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// `results.csv` of a tier-1 run.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Where to write tier1_report.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvalTier2Args {
    /// `results.csv` of a run; repeat for several tasks.
    #[arg(long, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// patient_id,task,baseline_label files.
    #[arg(long, num_args = 1..)]
    pub baseline: Vec<PathBuf>,
    /// Verdict logs (JSON lines).
    #[arg(long, num_args = 1..)]
    pub verdicts: Vec<PathBuf>,
    /// Task of each predictions file, in order; inferred from the baseline when omitted.
    #[arg(long, num_args = 1..)]
    pub task: Vec<String>,
    /// Where to write metrics_report.txt and metrics_report.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args)]
pub struct MetricsArgs {
    /// tp,fp,fn,tn; repeat to add rows and a pooled total.
    #[arg(long, required = true)]
    pub counts: Vec<String>,
}

#[derive(Args)]
pub struct PlantArgs {
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Patient ids to mutate, comma separated or repeated.
    #[arg(long, value_delimiter = ',')]
    pub patients: Vec<String>,
    /// Output results.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "demo")]
    pub run_id: String,
    /// task=run_dir, one per task.
    #[arg(long, num_args = 1..)]
    pub source: Vec<String>,
    #[arg(long, num_args = 1..)]
    pub baseline: Vec<PathBuf>,
    /// Append-only verdict log; created on first write.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Require `Authorization: Bearer <token>`.
    #[arg(long)]
    pub token: Option<String>,
}

pub enum CliError {
    Config(String),
    Failed(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Run(a) => commands::run(a),
        Command::EvalTier1(a) => commands::eval_tier1(a),
        Command::EvalTier2(a) => commands::eval_tier2(a),
        Command::Metrics(a) => commands::metrics(a),
        Command::PlantTier1Bug(a) => commands::plant(a),
        Command::Serve(a) => commands::serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
