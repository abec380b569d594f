use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use kinflow::config::CONFIG_KEYS;
use kinflow::{Error, Variant};

mod commands;

/// Skeleton-based video anomaly detection with kinematic features and a
/// masked autoregressive flow.
#[derive(Debug, Parser)]
#[command(name = "kinflow", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic gait dataset (train/ and test/ splits with manifests).
    Gen(GenArgs),
    /// Dump per-track feature series as CSV.
    Extract(ExtractArgs),
    /// Fit a flow model on the tracks of a manifest.
    Train(TrainArgs),
    /// Write per-video frame scores for the tracks of a manifest.
    Score(ScoreArgs),
    /// Compute micro-AUC of frame scores against the manifest's labels.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct Shared {
    /// Config file: flat `section.key = value` TOML, or an effective_config.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Feature set: hkvad1, hkvad2 or hkvad3.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Normal training tracks.
    #[arg(long, default_value_t = 200)]
    train: usize,
    /// Normal test tracks.
    #[arg(long, default_value_t = 50)]
    normal: usize,
    /// Anomalous test tracks.
    #[arg(long, default_value_t = 50)]
    anomalous: usize,
    /// Comma-separated anomaly kinds, cycled over the anomalous tracks.
    #[arg(long, value_delimiter = ',', default_value = "skateboard,run,fall")]
    kinds: Vec<kinflow::synth::AnomalyKind>,
    /// Frames per track.
    #[arg(long, default_value_t = 100)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory, one CSV per track.
    #[arg(long)]
    out: PathBuf,
    /// Write outlier-removed, smoothed series instead of raw ones.
    #[arg(long)]
    smoothed: bool,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Model file to write.
    #[arg(long, default_value = "model.json")]
    out: PathBuf,
    /// Per-epoch loss CSV (epoch,mean_nll,seconds).
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Output directory, one `<video>.csv` (frame,score,covered) per video.
    #[arg(long)]
    out: PathBuf,
    /// Also write one SVG plot per video into this directory.
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Score for frames no window covers: "max" or a number.
    #[arg(long)]
    fill: Option<kinflow::scoring::Fill>,
    #[command(flatten)]
    shared: Shared,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Manifest whose label files define the evaluated videos.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory written by `score`.
    #[arg(long)]
    scores: PathBuf,
    /// Write the ROC curve (fpr,tpr,threshold) here.
    #[arg(long)]
    roc: Option<PathBuf>,
    /// Also write the report JSON to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn config_help() -> String {
    let width = CONFIG_KEYS.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut text = String::from("Config keys (flags override the config file, which overrides defaults):\n");
    for (key, doc) in CONFIG_KEYS {
        text.push_str(&format!("  {key:<width$}  {doc}\n"));
    }
    text.push_str("\nKINFLOW_THREADS caps worker threads for `score` (1 = serial).");
    text
}

fn command() -> clap::Command {
    let help = config_help();
    let mut cmd = Cli::command().after_help(help.clone());
    for name in ["extract", "train", "score"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_help(help.clone()));
    }
    cmd
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Numeric(_) => 2,
        Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match command()
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Extract(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Score(a) => commands::score(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kinflow: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
