use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Robust autoregressive hidden semi-Markov segmentation of single-channel
/// recordings.
///
/// Exit codes: 0 success, 1 usage error, 2 data error, 3 training stopped
/// at the iteration limit without converging.
#[derive(Debug, Parser)]
#[command(name = "rarhsmm", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resample and normalize a raw recording; optionally rasterize its
    /// event annotations onto the output grid.
    Preprocess(PreprocessArgs),
    /// Fit a model from labelled or unlabelled sequences.
    Train(TrainArgs),
    /// Decode the most probable regime path of each sequence.
    Score(ScoreArgs),
    /// Compare predicted label tracks with ground truth.
    Eval(EvalArgs),
    /// Draw a synthetic sequence and its hidden path from a model.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Raw signal: one value per line, or `time,value` pairs.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Input rate in Hz; defaults to the file's `# rate=` header.
    #[arg(long)]
    pub rate_in: Option<f64>,
    /// Output rate in Hz (at most the input rate).
    #[arg(long)]
    pub rate_out: f64,
    /// Normalize to zero mean and unit variance after resampling.
    #[arg(long)]
    pub zscore: bool,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Annotation file: `onset,duration[,scorer_id]` in seconds.
    #[arg(long, value_name = "FILE", requires = "labels_out")]
    pub labels_in: Option<PathBuf>,
    /// Where to write the rasterized 0/1 label track.
    #[arg(long, value_name = "FILE", requires = "labels_in")]
    pub labels_out: Option<PathBuf>,
    /// Keep only annotations from this scorer.
    #[arg(long)]
    pub scorer: Option<u32>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// `supervised`, `unsupervised` or `expert:<scorer id>`.
    #[arg(long)]
    pub mode: String,
    /// A processed sequence file or a directory of them.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Label tracks (supervised) or annotation files (expert mode), matched
    /// to data files by file stem.
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// Starting model for unsupervised training: a model file or
    /// `paper-default`.
    #[arg(long, default_value = "paper-default")]
    pub init: String,
    /// AR order for supervised training and the default initialization.
    #[arg(long, default_value_t = 5)]
    pub order: usize,
    /// Longest regime duration in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub max_duration: f64,
    /// Number of regimes for supervised training; defaults to the largest
    /// label plus one.
    #[arg(long)]
    pub regimes: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub min_sigma: f64,
    /// Worker threads for the E-step; defaults to all cores.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Per-iteration log: `iteration,loglik,rel_change,flags`.
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Label track output; a directory when `--data` is one.
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write per-sample posterior regime probabilities.
    #[arg(long, value_name = "PATH")]
    pub posteriors: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted label track(s).
    #[arg(long, value_name = "PATH")]
    pub pred: PathBuf,
    /// Ground-truth label track(s), matched to predictions by file stem.
    #[arg(long, value_name = "PATH")]
    pub truth: PathBuf,
    /// Sample rate for files without a rate header.
    #[arg(long)]
    pub rate: Option<f64>,
    /// Comma-separated subset of `mcc,f1,event,nll`.
    #[arg(long, default_value = "mcc,f1,event", value_delimiter = ',')]
    pub metrics: Vec<String>,
    /// Model for the `nll` metric.
    #[arg(long, value_name = "FILE")]
    pub model: Option<PathBuf>,
    /// Held-out sequences for the `nll` metric.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// `key=value` report; printed to stdout when absent.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Hidden path output: `label,counter,tau` per sample.
    #[arg(long, value_name = "FILE")]
    pub truth: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Preprocess(a) => commands::preprocess(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rarhsmm: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
