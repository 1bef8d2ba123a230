//! Gyroscope-based detection of traces disturbed by device movement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{SensorRecording, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionMetrics {
    /// Mean Euclidean magnitude of the rotation rate, rad/s.
    pub mean_rate: f64,
    /// Largest magnitude, rad/s.
    pub max_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionThresholds {
    pub mean_threshold: f64,
    pub max_threshold: f64,
}

impl Default for MotionThresholds {
    fn default() -> Self {
        MotionThresholds { mean_threshold: 0.05, max_threshold: 0.5 }
    }
}

impl MotionThresholds {
    pub fn validate(&self) -> Result<()> {
        if self.mean_threshold >= 0.0 && self.max_threshold >= 0.0 {
            Ok(())
        } else {
            Err(Error::invalid("motion thresholds must be non-negative"))
        }
    }
}

pub fn motion_metrics(gyro: &[Vec3]) -> Result<MotionMetrics> {
    if gyro.is_empty() {
        return Err(Error::invalid("gyroscope data is empty"));
    }
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for g in gyro {
        let m = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        sum += m;
        max = max.max(m);
    }
    Ok(MotionMetrics { mean_rate: (sum / gyro.len() as f64).min(max), max_rate: max })
}

/// True if either criterion exceeds its threshold.
pub fn is_disturbed(metrics: &MotionMetrics, thresholds: &MotionThresholds) -> bool {
    metrics.mean_rate > thresholds.mean_threshold || metrics.max_rate > thresholds.max_threshold
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome<T> {
    pub kept: Vec<T>,
    pub rejected: Vec<T>,
    /// Recordings without gyroscope data; they are also part of `kept`.
    pub without_gyro: usize,
}

impl<T> FilterOutcome<T> {
    pub fn rejected_fraction(&self) -> f64 {
        let total = self.kept.len() + self.rejected.len();
        if total == 0 {
            0.0
        } else {
            self.rejected.len() as f64 / total as f64
        }
    }
}

/// Splits recordings into undisturbed and disturbed ones, preserving order.
pub fn filter_dataset(
    recordings: &[SensorRecording],
    thresholds: &MotionThresholds,
) -> Result<FilterOutcome<SensorRecording>> {
    filter_by(recordings, thresholds, |r| r)
}

/// [`filter_dataset`] for items that carry a recording.
pub fn filter_by<'a, T: Clone>(
    items: &'a [T],
    thresholds: &MotionThresholds,
    recording: impl Fn(&'a T) -> &'a SensorRecording,
) -> Result<FilterOutcome<T>> {
    thresholds.validate()?;
    let mut out = FilterOutcome { kept: Vec::new(), rejected: Vec::new(), without_gyro: 0 };
    for item in items {
        match &recording(item).gyro {
            Some(g) if is_disturbed(&motion_metrics(g)?, thresholds) => out.rejected.push(item.clone()),
            Some(_) => out.kept.push(item.clone()),
            None => {
                out.without_gyro += 1;
                out.kept.push(item.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_examples() {
        assert_eq!(
            motion_metrics(&[[0.0; 3]; 4]).unwrap(),
            MotionMetrics { mean_rate: 0.0, max_rate: 0.0 }
        );
        assert_eq!(
            motion_metrics(&[[3.0, 4.0, 0.0]]).unwrap(),
            MotionMetrics { mean_rate: 5.0, max_rate: 5.0 }
        );
        assert_eq!(
            motion_metrics(&[[1.0, 0.0, 0.0]; 9]).unwrap(),
            MotionMetrics { mean_rate: 1.0, max_rate: 1.0 }
        );
        assert!(motion_metrics(&[]).is_err());
    }

    #[test]
    fn disturbance_rule() {
        let t = MotionThresholds { mean_threshold: 0.1, max_threshold: 1.0 };
        let m = |a, b| MotionMetrics { mean_rate: a, max_rate: b };
        assert!(!is_disturbed(&m(0.0, 0.0), &t));
        assert!(is_disturbed(&m(0.01, 5.0), &t));
        assert!(is_disturbed(&m(0.2, 0.3), &t));
    }

    fn rec(rate: f64) -> SensorRecording {
        SensorRecording::new("d", None, 1.0, vec![[0.0; 3]; 3], Some(vec![[rate, 0.0, 0.0]; 3])).unwrap()
    }

    #[test]
    fn filtering() {
        let recs = vec![rec(0.0), rec(2.0), rec(0.0), rec(0.01)];
        let out = filter_dataset(&recs, &MotionThresholds::default()).unwrap();
        assert_eq!(out.kept, vec![rec(0.0), rec(0.0), rec(0.01)]);
        assert_eq!(out.rejected_fraction(), 0.25);
        let inf = MotionThresholds { mean_threshold: f64::INFINITY, max_threshold: f64::INFINITY };
        assert_eq!(filter_dataset(&recs, &inf).unwrap().rejected.len(), 0);
        let mut no_gyro = rec(5.0);
        no_gyro.gyro = None;
        let out = filter_dataset(&[no_gyro], &MotionThresholds::default()).unwrap();
        assert_eq!((out.kept.len(), out.without_gyro), (1, 1));
    }
}
