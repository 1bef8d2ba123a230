//! `magspy` command-line front end.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "magspy", version, about = "Magnetometer side-channel fingerprinting toolkit")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory for report.json, report.txt and other outputs.
    #[arg(long, global = true, default_value = "magspy-out")]
    pub out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Device profile (JSON) replacing the configured primary device.
    #[arg(long, global = true)]
    pub device_profile: Option<PathBuf>,
    /// Resample traces to this rate before feature extraction
    /// (`simulate`: render at this rate instead).
    #[arg(long, global = true)]
    pub rate: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct MotionArgs {
    /// Reject traces whose mean rotation rate exceeds this (rad/s).
    #[arg(long)]
    pub motion_mean_threshold: Option<f64>,
    /// Reject traces whose peak rotation rate exceeds this (rad/s).
    #[arg(long)]
    pub motion_max_threshold: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PeakArgs {
    #[arg(long)]
    pub min_height: Option<f64>,
    #[arg(long)]
    pub min_prominence: Option<f64>,
    /// Minimum peak width, samples.
    #[arg(long)]
    pub min_width: Option<usize>,
    /// Classification window after each detection, seconds.
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Matching tolerance against known starts, seconds.
    #[arg(long)]
    pub tolerance_s: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic labeled corpus (or continuous streams) to JSONL.
    Simulate {
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        traces_per_class: Option<usize>,
        /// Render this many continuous streams instead of single traces.
        #[arg(long)]
        streams: Option<usize>,
    },
    /// Train a forest on labeled recordings.
    Train {
        /// Labeled recordings (JSONL).
        #[arg(long)]
        data: PathBuf,
        /// Also write the averaged activity pattern of this label.
        #[arg(long)]
        pattern_label: Option<String>,
    },
    /// Classify recordings with a trained model.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        motion: MotionArgs,
    },
    /// Find (and optionally classify) activity starts in continuous recordings.
    Detect {
        /// Continuous recordings (JSONL).
        #[arg(long)]
        data: PathBuf,
        /// Activity pattern (JSON) written by `train --pattern-label`.
        #[arg(long)]
        pattern: PathBuf,
        /// Classify the window after each detection.
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        peaks: PeakArgs,
    },
    /// Run an experiment scenario, or score a model on labeled recordings.
    Eval {
        /// closed-world, open-world, sweep, continuous, movement or snr
        /// (default: the configured scenario).
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long, requires = "data")]
        model: Option<PathBuf>,
        #[arg(long, requires = "model")]
        data: Option<PathBuf>,
        #[command(flatten)]
        motion: MotionArgs,
    },
    /// SNR and pattern-correlation table for a range of gains.
    Snr {
        /// Comma-separated coupling gains.
        #[arg(long, value_delimiter = ',')]
        gains: Option<Vec<f64>>,
    },
    /// Closed-world accuracy across sampling rates.
    Sweep {
        /// Comma-separated rates, Hz.
        #[arg(long, value_delimiter = ',')]
        rates: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli.common, cli.command) {
        Ok(summary) => {
            print!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
