//! Classification of hand-held traces with and without gyroscope filtering.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::motion::{filter_dataset, is_disturbed, motion_metrics};
use crate::par;
use crate::seed;
use crate::simulator::{DeviceProfile, MotionScript, RotationEvent};
use crate::trace::SensorRecording;

use super::config::{ExperimentConfig, MovementConfig};
use super::corpus::{preprocess_all, Instance};
use super::experiments::{instances, labeled, predict_traces, render_split, train_on};

const STREAM_PICK: u64 = 0x706b;
const STREAM_MOTION: u64 = 0x6d6f;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementReport {
    pub n_test: usize,
    pub n_motion: usize,
    pub unfiltered_accuracy: f64,
    pub rejected_fraction: f64,
    pub filtered_accuracy: Option<f64>,
    /// Share of motion-scripted traces flagged as disturbed.
    pub motion_flagged: Option<f64>,
    /// Share of stationary traces flagged as disturbed.
    pub stationary_flagged: Option<f64>,
    /// Accuracy on the motion-scripted traces alone.
    pub motion_accuracy: Option<f64>,
}

/// Random rotation pulses for one `len`-sample trace.
pub fn random_motion(mc: &MovementConfig, len: usize, rate_hz: f64, key: u64) -> MotionScript {
    let mut rng = seed::rng(key);
    let count = rng.random_range(mc.events.0.max(1)..=mc.events.1.max(mc.events.0.max(1)));
    let rotation_events = (0..count)
        .map(|_| {
            let secs = rng.random_range(mc.event_duration_s.0..=mc.event_duration_s.1);
            let duration = ((secs * rate_hz).round() as usize).clamp(1, len);
            let start = rng.random_range(0..=len - duration);
            let axis = loop {
                let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if n > 0.1 && n <= 1.0 {
                    break v.map(|x| x / n);
                }
            };
            RotationEvent {
                start_index: start,
                duration_samples: duration,
                peak_rate_rad_s: rng.random_range(mc.peak_rate_rad_s.0..=mc.peak_rate_rad_s.1),
                axis,
            }
        })
        .collect();
    MotionScript { rotation_events }
}

fn share(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let v: Vec<bool> = flags.collect();
    (!v.is_empty()).then(|| v.iter().filter(|b| **b).count() as f64 / v.len() as f64)
}

pub fn run_movement(cfg: &ExperimentConfig) -> Result<MovementReport> {
    cfg.validate()?;
    let mc = &cfg.movement;
    let split = render_split(cfg)?;
    let names = &split.corpus.class_names;
    let trained = train_on(cfg, names, &split.train_recordings, &split.train, cfg.target_rate_hz)?;

    let test: Vec<Instance> = instances(&split.test);
    let n_motion = ((mc.motion_fraction * test.len() as f64).round() as usize).min(test.len());
    let mut order: Vec<usize> = (0..test.len()).collect();
    order.shuffle(&mut seed::rng(seed::derive(cfg.seed, &[STREAM_PICK])));
    let mut moving = vec![false; test.len()];
    for &i in &order[..n_motion] {
        moving[i] = true;
    }

    let recordings: Vec<(SensorRecording, bool)> = par::try_map_range(test.len(), |i| -> Result<_> {
        let inst = &test[i];
        let device = DeviceProfile {
            gyro_noise_std: mc.handheld_gyro_noise,
            ..split.corpus.devices[inst.device].clone()
        };
        let motion = if moving[i] {
            let len = split.corpus.activity(inst, cfg)?.resample_linear(device.rate_hz)?.len();
            let key = seed::derive(cfg.seed, &[STREAM_MOTION, inst.class as u64, inst.rep as u64]);
            Some(random_motion(mc, len, device.rate_hz, key))
        } else {
            None
        };
        Ok((split.corpus.render(inst, cfg, &device, motion.as_ref())?, moving[i]))
    })?;

    let recs: Vec<SensorRecording> = recordings.iter().map(|r| r.0.clone()).collect();
    let traces = labeled(preprocess_all(&recs, cfg.target_rate_hz)?, &split.test);
    let predictions = predict_traces(&trained.model, &traces, trained.bins)?;
    let correct: Vec<bool> = predictions.iter().zip(&traces).map(|(p, (_, l))| &p.label == l).collect();

    let filtered = filter_dataset(&recs, &mc.thresholds)?;
    let flagged: Vec<bool> = recs
        .iter()
        .map(|r| match &r.gyro {
            Some(g) => motion_metrics(g).map(|m| is_disturbed(&m, &mc.thresholds)),
            None => Ok(false),
        })
        .collect::<Result<_>>()?;

    Ok(MovementReport {
        n_test: recs.len(),
        n_motion,
        unfiltered_accuracy: share(correct.iter().copied()).unwrap_or(0.0),
        rejected_fraction: filtered.rejected_fraction(),
        filtered_accuracy: share((0..recs.len()).filter(|&i| !flagged[i]).map(|i| correct[i])),
        motion_flagged: share((0..recs.len()).filter(|&i| moving[i]).map(|i| flagged[i])),
        stationary_flagged: share((0..recs.len()).filter(|&i| !moving[i]).map(|i| flagged[i])),
        motion_accuracy: share((0..recs.len()).filter(|&i| moving[i]).map(|i| correct[i])),
    })
}
