//! `mdrobust`: synthesize radar datasets, extract feature tables under a
//! noise condition, and run the cross-validated noise sweeps.
//!
//! Every command writes into an output directory that ends up holding a
//! `run.json` manifest. Logs go to stderr; stdout carries only the `--json`
//! summary. Failures print one `error[<class>]: <message>` line and exit 1.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "mdrobust", version, about = "Noise-robustness study of micro-Doppler features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic drone / bird / reflector dataset.
    Synth(SynthArgs),
    /// Compute the feature table of a dataset under one noise condition.
    Extract(ExtractArgs),
    /// Cross-validate a classifier over a list of noise conditions.
    Evaluate(EvaluateArgs),
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// TOML file whose keys mirror the long flags; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Reuse a non-empty output directory.
    #[arg(long)]
    pub force: bool,
    /// Print a JSON summary on stdout.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Output dataset directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Balanced dataset with this many measurements per class.
    #[arg(long, conflicts_with_all = ["paper_ratio", "total"])]
    pub per_class: Option<usize>,
    /// Drone : bird : reflector = 44 : 56 : 19.
    #[arg(long)]
    pub paper_ratio: bool,
    /// Total measurement count for `--paper-ratio` (default 119).
    #[arg(long)]
    pub total: Option<usize>,
    #[arg(long)]
    pub range_bins: Option<usize>,
    /// Slow-time samples per segment.
    #[arg(long)]
    pub segment_len: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory or `synth:<per-class|paper-ratio>:<n>[:<seed>]`.
    pub dataset: Option<String>,
    /// Noise condition: raw | awgn:<dB> | phase:<deg> | combined:<dB>:<deg>.
    #[arg(long, allow_hyphen_values = true)]
    pub noise: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Spectrogram width in columns.
    #[arg(long)]
    pub window: Option<usize>,
    /// Also dump every spectrogram under `spectrograms/`.
    #[arg(long)]
    pub spectrograms: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory or `synth:<per-class|paper-ratio>:<n>[:<seed>]`.
    pub dataset: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// rf | svm-rbf | svm-linear.
    #[arg(long)]
    pub classifier: Option<String>,
    /// Named condition list; `table3` is the full 33-condition sweep.
    #[arg(long, conflicts_with = "noise")]
    pub schedule: Option<String>,
    /// A noise condition; repeatable. Defaults to raw only.
    #[arg(long, allow_hyphen_values = true)]
    pub noise: Vec<String>,
    /// selected5 | full10 | comma-separated feature names.
    #[arg(long)]
    pub features: Option<String>,
    #[arg(long)]
    pub window: Option<usize>,
    /// Permutation repeats per feature for importance.
    #[arg(long)]
    pub importance_repeats: Option<usize>,
    /// Skip the feature-subset ablation.
    #[arg(long)]
    pub skip_ablation: bool,
    /// Also run the linear single-feature sweep for each of the ten features.
    #[arg(long)]
    pub single_feature: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("bad arguments")
                .trim_start_matches("error: ");
            eprintln!("error[usage]: {line}");
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Extract(a) => commands::extract(a),
        Command::Evaluate(a) => commands::evaluate(a),
    };
    match result {
        Ok(summary) => {
            if let Some(s) = summary {
                println!("{s}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

fn report(e: &CliError) {
    let msg = e.to_string().replace('\n', " ");
    eprintln!("error[{}]: {msg}", e.class());
}
