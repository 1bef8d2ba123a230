use serde::{Deserialize, Serialize};

use crate::classifier::{ForestConfig, DEFAULT_BIN_COUNT};
use crate::detector::{PeakThresholds, DEFAULT_TOLERANCE_S, DEFAULT_WINDOW_S};
use crate::error::{Error, Result};
use crate::motion::MotionThresholds;
use crate::simulator::{DeviceProfile, SignatureParams, TraceVariability};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    #[default]
    ClosedWorld,
    OpenWorld,
    Sweep,
    Continuous,
    Movement,
    Snr,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::ClosedWorld => "closed-world",
            Scenario::OpenWorld => "open-world",
            Scenario::Sweep => "sweep",
            Scenario::Continuous => "continuous",
            Scenario::Movement => "movement",
            Scenario::Snr => "snr",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::invalid(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpenWorldConfig {
    pub monitored: usize,
    pub unmonitored_train: usize,
    pub background: usize,
    pub background_traces: usize,
}

impl Default for OpenWorldConfig {
    fn default() -> Self {
        OpenWorldConfig { monitored: 5, unmonitored_train: 45, background: 200, background_traces: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub rates_hz: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { rates_hz: vec![100.0, 10.0, 1.0, 0.5] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuousConfig {
    pub streams: usize,
    pub stream_s: f64,
    /// Index into the class list of the target activity.
    pub target_class: usize,
    pub distractors: usize,
    pub thresholds: PeakThresholds,
    pub window_s: f64,
    pub tolerance_s: f64,
}

impl Default for ContinuousConfig {
    fn default() -> Self {
        ContinuousConfig {
            streams: 50,
            stream_s: 100.0,
            target_class: 0,
            distractors: 2,
            thresholds: PeakThresholds::calibrated(),
            window_s: DEFAULT_WINDOW_S,
            tolerance_s: DEFAULT_TOLERANCE_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MovementConfig {
    /// Share of test traces rendered with a motion script.
    pub motion_fraction: f64,
    pub thresholds: MotionThresholds,
    pub events: (usize, usize),
    pub peak_rate_rad_s: (f64, f64),
    pub event_duration_s: (f64, f64),
    /// Gyroscope noise of hand-held (but not moving) test traces, rad/s.
    pub handheld_gyro_noise: f64,
}

impl Default for MovementConfig {
    fn default() -> Self {
        MovementConfig {
            motion_fraction: 0.21,
            thresholds: MotionThresholds::default(),
            events: (1, 3),
            peak_rate_rad_s: (0.8, 2.5),
            event_duration_s: (0.3, 1.5),
            handheld_gyro_noise: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrConfig {
    pub gains: Vec<f64>,
    pub high_s: f64,
    pub low_s: f64,
    pub repeats: usize,
}

impl Default for SnrConfig {
    fn default() -> Self {
        SnrConfig { gains: vec![0.0, 1.0, 1.585, 2.0, 3.981, 7.962], high_s: 2.0, low_s: 2.0, repeats: 25 }
    }
}

/// Everything needed to reproduce one experiment run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub classes: usize,
    pub traces_per_class: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Used to build the device profile when `device` is absent.
    pub snr_db: f64,
    pub device: Option<DeviceProfile>,
    /// Further devices; traces are spread round-robin across all devices.
    pub extra_devices: Vec<DeviceProfile>,
    pub seed: u64,
    pub forest: ForestConfig,
    pub grid_search: bool,
    pub grid: Option<Vec<ForestConfig>>,
    pub cv_folds: usize,
    pub bin_count: usize,
    pub train_fraction: f64,
    pub target_rate_hz: Option<f64>,
    pub signature: SignatureParams,
    pub variability: TraceVariability,
    pub open_world: OpenWorldConfig,
    pub sweep: SweepConfig,
    pub continuous: ContinuousConfig,
    pub movement: MovementConfig,
    pub snr: SnrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: Scenario::ClosedWorld,
            classes: 20,
            traces_per_class: 40,
            duration_s: 12.0,
            rate_hz: 100.0,
            snr_db: 12.0,
            device: None,
            extra_devices: Vec::new(),
            seed: 1,
            forest: ForestConfig::default(),
            grid_search: false,
            grid: None,
            cv_folds: 5,
            bin_count: DEFAULT_BIN_COUNT,
            train_fraction: 0.8,
            target_rate_hz: None,
            signature: SignatureParams::default(),
            variability: TraceVariability::default(),
            open_world: OpenWorldConfig::default(),
            sweep: SweepConfig::default(),
            continuous: ContinuousConfig::default(),
            movement: MovementConfig::default(),
            snr: SnrConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn for_scenario(scenario: Scenario) -> Self {
        ExperimentConfig { scenario, ..Default::default() }
    }

    /// Primary device followed by the extra devices.
    pub fn devices(&self) -> Vec<DeviceProfile> {
        let primary = self
            .device
            .clone()
            .unwrap_or_else(|| DeviceProfile::with_snr(self.snr_db, self.rate_hz));
        std::iter::once(primary).chain(self.extra_devices.iter().cloned()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.traces_per_class == 0 {
            return Err(Error::invalid("classes and traces_per_class must be positive"));
        }
        if !(self.duration_s > 0.0 && self.rate_hz > 0.0) {
            return Err(Error::invalid("duration_s and rate_hz must be positive"));
        }
        if self.bin_count == 0 {
            return Err(Error::invalid("bin_count must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must be in (0, 1)"));
        }
        for d in self.devices() {
            d.validate()?;
        }
        self.forest.validate()?;
        match self.scenario {
            Scenario::OpenWorld if self.open_world.monitored == 0 => {
                Err(Error::invalid("open world needs at least one monitored class"))
            }
            Scenario::Continuous if self.continuous.target_class >= self.classes => {
                Err(Error::invalid("target_class is not in the class set"))
            }
            Scenario::Continuous if self.continuous.distractors >= self.classes => {
                Err(Error::invalid("not enough classes for the requested distractors"))
            }
            Scenario::Movement if !(0.0..=1.0).contains(&self.movement.motion_fraction) => {
                Err(Error::invalid("motion_fraction must be in [0, 1]"))
            }
            Scenario::Sweep if self.sweep.rates_hz.is_empty() => Err(Error::invalid("sweep needs at least one rate")),
            Scenario::Sweep => {
                let native = self.devices().iter().map(|d| d.rate_hz).fold(f64::INFINITY, f64::min);
                match self.sweep.rates_hz.iter().find(|r| !(r.is_finite() && **r > 0.0 && **r <= native)) {
                    Some(r) => Err(Error::invalid(format!("sweep rate {r} Hz is not in (0, {native}]"))),
                    None => Ok(()),
                }
            }
            _ => Ok(()),
        }
    }
}
