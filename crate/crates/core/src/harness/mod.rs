//! End-to-end experiment scenarios and their reports.

mod config;
mod continuous;
mod corpus;
mod experiments;
mod movement;
mod snr;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::write_json;

pub use config::{
    ContinuousConfig, ExperimentConfig, MovementConfig, OpenWorldConfig, Scenario, SnrConfig, SweepConfig,
};
pub use continuous::{render_stream, run_continuous, ContinuousReport, Embed, StreamOutcome};
pub use corpus::{
    augmented_training_set, effective_bins, feature_dataset, features_of, fit, numbered_names, preprocess_all,
    Corpus, Instance, TrainedModel,
};
pub use experiments::{
    run_closed_world, run_open_world, run_sampling_sweep, ClosedWorldReport, OpenWorldReport, SweepReport, SweepRow,
};
pub use movement::{random_motion, run_movement, MovementReport};
pub use snr::{run_snr_calibration, SnrReport, SnrRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Outcome {
    ClosedWorld(ClosedWorldReport),
    OpenWorld(OpenWorldReport),
    Sweep(SweepReport),
    Continuous(ContinuousReport),
    Movement(MovementReport),
    Snr(SnrReport),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub result: Outcome,
}

/// Runs the scenario named in the config.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let result = match cfg.scenario {
        Scenario::ClosedWorld => Outcome::ClosedWorld(run_closed_world(cfg)?),
        Scenario::OpenWorld => Outcome::OpenWorld(run_open_world(cfg)?),
        Scenario::Sweep => Outcome::Sweep(run_sampling_sweep(cfg, &cfg.sweep.rates_hz)?),
        Scenario::Continuous => Outcome::Continuous(run_continuous(cfg)?),
        Scenario::Movement => Outcome::Movement(run_movement(cfg)?),
        Scenario::Snr => Outcome::Snr(run_snr_calibration(cfg)?),
    };
    Ok(RunReport { scenario: cfg.scenario, config: cfg.clone(), result })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{:.1}", 100.0 * x))
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut out = format!("scenario: {}\nseed: {}\n", self.scenario.name(), self.config.seed);
        out.push_str(&self.result.to_text());
        out
    }

    /// Writes `report.json` and `report.txt` into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_report(dir, self, &self.to_text())
    }
}

/// Writes any serializable report as `report.json` plus a text rendering.
pub fn write_report<T: Serialize>(dir: &Path, report: &T, text: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(report, dir.join("report.json"))?;
    let txt = dir.join("report.txt");
    std::fs::write(&txt, text).map_err(|e| Error::io(&txt, e))
}

impl Outcome {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        match self {
            Outcome::ClosedWorld(r) => {
                let _ = writeln!(s, "train: {}  test: {}  features: {}  rate: {} Hz", r.n_train, r.n_test, r.n_features, r.rate_hz);
                s.push_str(&r.eval.to_text());
                for (d, a) in r.per_device_accuracy.iter().enumerate() {
                    let _ = writeln!(s, "device-{d} accuracy: {}%", pct(*a));
                }
            }
            Outcome::OpenWorld(r) => {
                let _ = writeln!(
                    s,
                    "test: {} monitored, {} unmonitored, {} background",
                    r.n_test_monitored, r.n_test_unmonitored, r.n_test_background
                );
                s.push_str(&r.monitored.to_text());
                let _ = writeln!(s, "mean monitored precision: {}%", pct(r.mean_monitored_precision));
                let _ = writeln!(
                    s,
                    "pooled precision: {}%  recall: {}%  f1: {}%",
                    pct(r.pooled.precision),
                    pct(r.pooled.recall),
                    pct(r.pooled.f1)
                );
            }
            Outcome::Sweep(r) => {
                let _ = writeln!(s, "{:>10} {:>10} {:>9}", "Rate,Hz", "Accuracy,%", "Features");
                for row in &r.rows {
                    let _ = writeln!(s, "{:>10} {:>10.1} {:>9}", row.rate_hz, 100.0 * row.accuracy, row.n_features);
                }
                let _ = writeln!(s, "chance: {:.1}%", 100.0 * r.chance);
            }
            Outcome::Continuous(r) => {
                let _ = writeln!(s, "target: {}  streams: {}", r.target, r.streams.len());
                let _ = writeln!(s, "tp: {}  fp: {}  fn: {}", r.counts.tp, r.counts.fp, r.counts.fn_);
                let _ = writeln!(s, "precision: {}%  recall: {}%", pct(r.precision), pct(r.recall));
                let _ = writeln!(
                    s,
                    "classification at peaks: {}%  known-start: {}%",
                    pct(r.classify_at_peaks_accuracy),
                    pct(Some(r.closed_world_accuracy))
                );
            }
            Outcome::Movement(r) => {
                let _ = writeln!(s, "test: {}  with motion: {}", r.n_test, r.n_motion);
                let _ = writeln!(s, "accuracy unfiltered: {}%", pct(Some(r.unfiltered_accuracy)));
                let _ = writeln!(s, "accuracy filtered: {}%", pct(r.filtered_accuracy));
                let _ = writeln!(s, "rejected: {}%", pct(Some(r.rejected_fraction)));
                let _ = writeln!(
                    s,
                    "flagged: {}% of moving, {}% of stationary",
                    pct(r.motion_flagged),
                    pct(r.stationary_flagged)
                );
            }
            Outcome::Snr(r) => {
                let _ = writeln!(s, "{:>8} {:>12} {:>10} {:>12}", "Gain", "Nominal,dB", "SNR,dB", "Correlation");
                for row in &r.rows {
                    let corr = row.correlation.map_or_else(|| "n/a".to_string(), |c| format!("{c:.3}"));
                    let nominal = row.nominal_snr_db.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
                    let snr = row.snr_db.map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"));
                    let _ = writeln!(s, "{:>8.3} {:>12} {:>10} {:>12}", row.gain, nominal, snr, corr);
                }
            }
        }
        s
    }
}
