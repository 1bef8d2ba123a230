//! SNR and pattern-correlation calibration on the alternating load pattern.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::par;
use crate::seed;
use crate::simulator::{estimate_snr, pattern_correlation, render_recording, synth_square_pattern, DeviceProfile};

use super::config::ExperimentConfig;

const STREAM_SNR: u64 = 0x736e72;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub gain: f64,
    pub noise_std: f64,
    /// Absent for a zero-gain profile.
    pub nominal_snr_db: Option<f64>,
    /// Absent for a noiseless profile.
    pub snr_db: Option<f64>,
    pub correlation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub rows: Vec<SnrRow>,
}

pub fn run_snr_calibration(cfg: &ExperimentConfig) -> Result<SnrReport> {
    cfg.validate()?;
    let sc = &cfg.snr;
    let base = cfg.devices()[0].clone();
    let pattern = synth_square_pattern(sc.high_s, sc.low_s, sc.repeats, base.rate_hz)?;
    let rows = par::try_map_range(sc.gains.len(), |i| -> Result<SnrRow> {
        let device = DeviceProfile { gain: sc.gains[i], ..base.clone() };
        let rec = render_recording(&pattern, &device, None, seed::derive(cfg.seed, &[STREAM_SNR, i as u64]))?;
        Ok(SnrRow {
            gain: device.gain,
            noise_std: device.noise_std,
            nominal_snr_db: Some(device.nominal_snr_db()).filter(|v| v.is_finite()),
            snr_db: Some(estimate_snr(&rec, &pattern)?).filter(|v| v.is_finite()),
            correlation: pattern_correlation(&rec, &pattern).ok(),
        })
    })?;
    Ok(SnrReport { rows })
}
