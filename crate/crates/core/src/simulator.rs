//! Synthetic CPU activity and its magnetometer footprint.
//!
//! The coupling model is linear: a CPU load `u ∈ [0, 1]` adds `gain · u` microtesla
//! along a fixed device-specific direction on top of the (possibly rotating)
//! ambient field, plus i.i.d. Gaussian noise per axis.

use nalgebra::{Rotation3, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Exp1, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::pca_first_component;
use crate::seed;
use crate::trace::{CpuPattern, SensorRecording, Vec3};

const STREAM_SIGNATURE: u64 = 0x5167;
const STREAM_VARIATION: u64 = 0x7a12;
const STREAM_MAG_NOISE: u64 = 0x4d41;
const STREAM_GYRO_NOISE: u64 = 0x4759;

/// Physical parameters of one simulated device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    /// Ambient geomagnetic field, µT.
    pub baseline_field: Vec3,
    /// Unit direction of the CPU-induced disturbance.
    pub coupling_dir: Vec3,
    /// Disturbance amplitude at 100 % load, µT.
    pub gain: f64,
    /// Per-axis magnetometer noise standard deviation, µT.
    pub noise_std: f64,
    pub rate_hz: f64,
    /// Per-axis gyroscope noise standard deviation, rad/s.
    #[serde(default)]
    pub gyro_noise_std: f64,
}

impl DeviceProfile {
    /// A profile whose amplitude-to-noise ratio is `snr_db` (20·log10 convention)
    /// with unit noise.
    pub fn with_snr(snr_db: f64, rate_hz: f64) -> Self {
        DeviceProfile {
            baseline_field: [22.0, -6.0, -41.0],
            coupling_dir: [0.36, -0.48, 0.8],
            gain: 10f64.powf(snr_db / 20.0),
            noise_std: 1.0,
            rate_hz,
            gyro_noise_std: 0.0,
        }
    }

    /// Nominal SNR in dB implied by `gain / noise_std`.
    pub fn nominal_snr_db(&self) -> f64 {
        20.0 * (self.gain / self.noise_std).log10()
    }

    pub fn validate(&self) -> Result<()> {
        let norm = self.coupling_dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("coupling_dir must be a unit vector (norm {norm})")));
        }
        if !(self.gain >= 0.0 && self.noise_std >= 0.0 && self.gyro_noise_std >= 0.0) {
            return Err(Error::invalid("gain and noise levels must be non-negative"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::invalid("device rate_hz must be positive"));
        }
        if !self.baseline_field.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("baseline_field must be finite"));
        }
        Ok(())
    }
}

/// One smooth rotation pulse: the rate follows `peak · sin²` over its duration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationEvent {
    pub start_index: usize,
    pub duration_samples: usize,
    pub peak_rate_rad_s: f64,
    /// Unit rotation axis in the device frame.
    pub axis: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionScript {
    pub rotation_events: Vec<RotationEvent>,
}

impl MotionScript {
    pub fn validate(&self, len: usize) -> Result<()> {
        for (i, ev) in self.rotation_events.iter().enumerate() {
            if ev.duration_samples == 0 || ev.start_index + ev.duration_samples > len {
                return Err(Error::invalid(format!(
                    "rotation event {i} does not fit in a recording of {len} samples"
                )));
            }
            if !(ev.peak_rate_rad_s >= 0.0) {
                return Err(Error::invalid(format!("rotation event {i} has negative peak rate")));
            }
            let norm = ev.axis.iter().map(|v| v * v).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::invalid(format!("rotation event {i} axis is not a unit vector")));
            }
        }
        Ok(())
    }

    /// Instantaneous rotation rate (rad/s, device frame) at every sample.
    pub fn rates(&self, len: usize) -> Vec<Vec3> {
        let mut out = vec![[0.0; 3]; len];
        for ev in &self.rotation_events {
            let d = ev.duration_samples as f64;
            for u in 0..ev.duration_samples {
                let i = ev.start_index + u;
                if i >= len {
                    break;
                }
                let phase = std::f64::consts::PI * (u as f64 + 0.5) / d;
                let rate = ev.peak_rate_rad_s * phase.sin().powi(2);
                for k in 0..3 {
                    out[i][k] += rate * ev.axis[k];
                }
            }
        }
        out
    }
}

/// Shape parameters of generated class signatures.
///
/// A signature is a sequence of fixed-length cells; each cell holds a few
/// trapezoidal bursts whose total duty cycle stays close to `duty`. The burst
/// layout carries the class identity at sub-cell time scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignatureParams {
    pub cell_s: f64,
    pub max_bursts_per_cell: usize,
    pub duty: (f64, f64),
    pub burst_level: (f64, f64),
    pub ramp_s: f64,
}

impl Default for SignatureParams {
    fn default() -> Self {
        SignatureParams {
            cell_s: 1.0,
            max_bursts_per_cell: 3,
            duty: (0.47, 0.53),
            burst_level: (0.7, 1.0),
            ramp_s: 0.02,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive, got {v}")))
    }
}

/// Deterministic class signature keyed by `(class_id, seed)`.
pub fn make_class_signature(class_id: &str, duration_s: f64, rate_hz: f64, seed: u64) -> Result<CpuPattern> {
    make_class_signature_with(&SignatureParams::default(), class_id, duration_s, rate_hz, seed)
}

pub fn make_class_signature_with(
    params: &SignatureParams,
    class_id: &str,
    duration_s: f64,
    rate_hz: f64,
    seed: u64,
) -> Result<CpuPattern> {
    check_positive("duration_s", duration_s)?;
    check_positive("rate_hz", rate_hz)?;
    check_positive("cell_s", params.cell_s)?;
    let mut rng = seed::rng(seed::derive(seed, &[STREAM_SIGNATURE, seed::hash_str(class_id)]));
    let n = ((duration_s * rate_hz).round() as usize).max(1);

    // (start_s, end_s, level), sorted and disjoint
    let mut bursts: Vec<(f64, f64, f64)> = Vec::new();
    let cells = (duration_s / params.cell_s).ceil() as usize;
    for cell in 0..cells {
        let origin = cell as f64 * params.cell_s;
        let count = rng.random_range(1..=params.max_bursts_per_cell.max(1));
        let duty = rng.random_range(params.duty.0..=params.duty.1);
        let widths = dirichlet(&mut rng, count);
        let gaps = dirichlet(&mut rng, count + 1);
        let mut t = origin + gaps[0] * (1.0 - duty) * params.cell_s;
        for b in 0..count {
            let w = widths[b] * duty * params.cell_s;
            let level = rng.random_range(params.burst_level.0..=params.burst_level.1);
            bursts.push((t, t + w, level));
            t += w + gaps[b + 1] * (1.0 - duty) * params.cell_s;
        }
    }

    let ramp = params.ramp_s.max(0.0);
    let mut values = vec![0.0; n];
    let mut next = 0;
    for (i, v) in values.iter_mut().enumerate() {
        let t = i as f64 / rate_hz;
        while next < bursts.len() && bursts[next].1 <= t {
            next += 1;
        }
        if let Some(&(start, end, level)) = bursts.get(next) {
            if t >= start {
                let edge = (t - start).min(end - t);
                let shape = if ramp > 0.0 { (edge / ramp).clamp(0.0, 1.0) } else { 1.0 };
                *v = level * shape;
            }
        }
    }
    CpuPattern::new(values, rate_hz)
}

fn dirichlet(rng: &mut impl Rng, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|d| d / total).collect()
}

/// `repeats` cycles of full load for `high_s` then idle for `low_s`.
pub fn synth_square_pattern(high_s: f64, low_s: f64, repeats: usize, rate_hz: f64) -> Result<CpuPattern> {
    check_positive("high_s", high_s)?;
    check_positive("low_s", low_s)?;
    check_positive("rate_hz", rate_hz)?;
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    let high = (high_s * rate_hz).round() as usize;
    let low = (low_s * rate_hz).round() as usize;
    if high == 0 || low == 0 {
        return Err(Error::invalid("phase shorter than one sample"));
    }
    let mut values = Vec::with_capacity(repeats * (high + low));
    for _ in 0..repeats {
        values.extend(std::iter::repeat(1.0).take(high));
        values.extend(std::iter::repeat(0.0).take(low));
    }
    CpuPattern::new(values, rate_hz)
}

/// Per-rendering variation of a class signature: timing jitter, load scaling
/// and a slowly varying background load from unrelated system activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceVariability {
    /// Relative standard deviation of the global time stretch.
    pub stretch_std: f64,
    /// Standard deviation of the start offset, seconds.
    pub offset_std_s: f64,
    /// Range of the multiplicative load scale.
    pub amplitude: (f64, f64),
    /// Scale of the background load.
    pub background_amplitude: f64,
    pub background_components: usize,
    /// Frequency range of the background sinusoids, Hz.
    pub background_freq_hz: (f64, f64),
}

impl Default for TraceVariability {
    fn default() -> Self {
        TraceVariability {
            stretch_std: 0.005,
            offset_std_s: 0.02,
            amplitude: (0.85, 1.0),
            background_amplitude: 0.25,
            background_components: 3,
            background_freq_hz: (0.02, 0.3),
        }
    }
}

impl TraceVariability {
    /// Renders every instance exactly as the signature.
    pub fn none() -> Self {
        TraceVariability {
            stretch_std: 0.0,
            offset_std_s: 0.0,
            amplitude: (1.0, 1.0),
            background_amplitude: 0.0,
            background_components: 0,
            background_freq_hz: (0.0, 0.0),
        }
    }
}

/// One noisy instance of `signature`, deterministic in `seed`.
pub fn vary_pattern(signature: &CpuPattern, var: &TraceVariability, seed: u64) -> Result<CpuPattern> {
    let mut rng = seed::rng(seed::derive(seed, &[STREAM_VARIATION]));
    let n = signature.len();
    let rate = signature.rate_hz;
    let normal = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let stretch = 1.0 + var.stretch_std * normal(&mut rng);
    let offset = var.offset_std_s * normal(&mut rng) * rate;
    let amp = if var.amplitude.1 > var.amplitude.0 {
        rng.random_range(var.amplitude.0..=var.amplitude.1)
    } else {
        var.amplitude.0
    };
    let components: Vec<(f64, f64, f64)> = (0..var.background_components)
        .map(|_| {
            let weight = normal(&mut rng);
            let (lo, hi) = var.background_freq_hz;
            let freq = if hi > lo { rng.random_range(lo..hi) } else { lo };
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            (weight, freq, phase)
        })
        .collect();
    let bg_scale = if components.is_empty() {
        0.0
    } else {
        var.background_amplitude / components.len() as f64
    };
    let last = (n - 1) as f64;
    let values = (0..n)
        .map(|j| {
            let pos = ((j as f64 - offset) * stretch).clamp(0.0, last);
            let i0 = pos.floor() as usize;
            let i1 = (i0 + 1).min(n - 1);
            let frac = pos - i0 as f64;
            let base = signature.values[i0] * (1.0 - frac) + signature.values[i1] * frac;
            let t = j as f64 / rate;
            let bg: f64 = components
                .iter()
                .map(|&(w, f, p)| w * (std::f64::consts::TAU * f * t + p).sin())
                .sum();
            (base * amp + bg_scale * bg).clamp(0.0, 1.0)
        })
        .collect();
    CpuPattern::new(values, rate)
}

/// Renders a CPU pattern into a magnetometer + gyroscope recording.
pub fn render_recording(
    cpu: &CpuPattern,
    device: &DeviceProfile,
    motion: Option<&MotionScript>,
    seed: u64,
) -> Result<SensorRecording> {
    device.validate()?;
    let cpu = cpu.resample_linear(device.rate_hz)?;
    let n = cpu.len();
    if let Some(m) = motion {
        m.validate(n)?;
    }
    let rates = motion.map(|m| m.rates(n));
    let dt = 1.0 / device.rate_hz;
    let baseline = Vector3::from(device.baseline_field);
    let mut mag_rng = seed::rng(seed::derive(seed, &[STREAM_MAG_NOISE]));
    let mut gyro_rng = seed::rng(seed::derive(seed, &[STREAM_GYRO_NOISE]));
    let mag_noise = Normal::new(0.0, device.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let gyro_noise =
        Normal::new(0.0, device.gyro_noise_std).map_err(|e| Error::invalid(e.to_string()))?;

    // Device orientation (device → world); the sensor sees the world field in its own frame.
    let mut orientation = Rotation3::identity();
    let mut mag = Vec::with_capacity(n);
    let mut gyro = Vec::with_capacity(n);
    for i in 0..n {
        let omega = rates.as_ref().map_or([0.0; 3], |r| r[i]);
        if omega != [0.0; 3] {
            orientation *= Rotation3::from_scaled_axis(Vector3::from(omega) * dt);
        }
        let field = if rates.is_some() {
            orientation.inverse() * baseline
        } else {
            baseline
        };
        let load = device.gain * cpu.values[i];
        let mut sample = [0.0; 3];
        for k in 0..3 {
            let noise = if device.noise_std > 0.0 { mag_noise.sample(&mut mag_rng) } else { 0.0 };
            sample[k] = field[k] + load * device.coupling_dir[k] + noise;
        }
        mag.push(sample);
        let mut g = omega;
        if device.gyro_noise_std > 0.0 {
            for v in &mut g {
                *v += gyro_noise.sample(&mut gyro_rng);
            }
        }
        gyro.push(g);
    }
    SensorRecording::new("simulated", None, device.rate_hz, mag, Some(gyro))
}

/// Aligns `reference` to the recording's rate and returns both truncated to
/// the shorter length: (projected trace, reference values).
fn aligned(recording: &SensorRecording, reference: &CpuPattern) -> Result<(Vec<f64>, Vec<f64>)> {
    let reference = reference.resample_linear(recording.rate_hz)?;
    let pca = pca_first_component(&recording.mag, recording.rate_hz)?;
    let n = pca.projected.len().min(reference.len());
    Ok((pca.projected.values[..n].to_vec(), reference.values[..n].to_vec()))
}

/// Disturbance amplitude over idle standard deviation, in dB (20·log10).
///
/// Samples with reference load ≥ 0.5 count as high load. Returns `+∞` when
/// the idle segment has zero spread.
pub fn estimate_snr(recording: &SensorRecording, reference: &CpuPattern) -> Result<f64> {
    let (trace, reference) = aligned(recording, reference)?;
    let (mut high, mut idle) = (Vec::new(), Vec::new());
    for (t, r) in trace.iter().zip(&reference) {
        if *r >= 0.5 {
            high.push(*t);
        } else {
            idle.push(*t);
        }
    }
    if high.is_empty() || idle.is_empty() {
        return Err(Error::invalid("reference needs both high-load and idle samples"));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let idle_mean = mean(&idle);
    let amplitude = (mean(&high) - idle_mean).abs();
    let sigma = (idle.iter().map(|v| (v - idle_mean).powi(2)).sum::<f64>() / idle.len() as f64).sqrt();
    if sigma == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (amplitude / sigma).log10())
}

/// Absolute Pearson correlation of two equal-length series.
pub fn abs_pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::invalid("correlation needs two equal-length series of ≥ 2 samples"));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::invalid("zero variance"));
    }
    Ok((sab / (saa * sbb).sqrt()).abs().min(1.0))
}

/// |Pearson r| between the PCA-reduced recording and the reference pattern.
pub fn pattern_correlation(recording: &SensorRecording, reference: &CpuPattern) -> Result<f64> {
    let (trace, reference) = aligned(recording, reference)?;
    abs_pearson(&trace, &reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(gain: f64) -> DeviceProfile {
        DeviceProfile {
            baseline_field: [50.0, 0.0, 0.0],
            coupling_dir: [0.0, 0.0, 1.0],
            gain,
            noise_std: 0.0,
            rate_hz: 1.0,
            gyro_noise_std: 0.0,
        }
    }

    #[test]
    fn signature_is_deterministic_and_bounded() {
        let a = make_class_signature("a", 12.0, 100.0, 3).unwrap();
        assert_eq!(a, make_class_signature("a", 12.0, 100.0, 3).unwrap());
        assert_eq!(a.len(), 1200);
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let b = make_class_signature("b", 12.0, 100.0, 3).unwrap();
        let dist: f64 = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).powi(2)).sum();
        assert!(dist.sqrt() > 0.0);
        assert!(make_class_signature("a", 0.0, 100.0, 3).is_err());
    }

    #[test]
    fn signature_duty_near_half() {
        let a = make_class_signature("x", 12.0, 100.0, 9).unwrap();
        let busy = a.values.iter().filter(|v| **v > 0.0).count() as f64 / a.len() as f64;
        assert!((0.4..0.6).contains(&busy), "{busy}");
    }

    #[test]
    fn square_pattern_examples() {
        let p = synth_square_pattern(2.0, 2.0, 3, 1.0).unwrap();
        assert_eq!(p.values, vec![1., 1., 0., 0., 1., 1., 0., 0., 1., 1., 0., 0.]);
        let p = synth_square_pattern(1.0, 1.0, 1, 2.0).unwrap();
        assert_eq!(p.values, vec![1., 1., 0., 0.]);
        assert_eq!(synth_square_pattern(2.0, 1.5, 4, 10.0).unwrap().len(), 140);
        assert!(synth_square_pattern(0.0, 1.0, 1, 1.0).is_err());
        assert!(synth_square_pattern(1.0, 1.0, 0, 1.0).is_err());
    }

    #[test]
    fn zero_coupling_gives_baseline() {
        let cpu = make_class_signature("a", 10.0, 1.0, 0).unwrap();
        let rec = render_recording(&cpu, &quiet(0.0), None, 1).unwrap();
        assert!(rec.mag.iter().all(|s| *s == [50.0, 0.0, 0.0]));
        assert!(rec.gyro.unwrap().iter().all(|g| *g == [0.0; 3]));
    }

    #[test]
    fn forced_model_output() {
        let cpu = CpuPattern::new(vec![0.0, 1.0], 1.0).unwrap();
        let rec = render_recording(&cpu, &quiet(3.0), None, 1).unwrap();
        assert_eq!(rec.mag, vec![[50.0, 0.0, 0.0], [50.0, 0.0, 3.0]]);
    }

    #[test]
    fn rendering_is_deterministic() {
        let cpu = make_class_signature("a", 5.0, 50.0, 0).unwrap();
        let dev = DeviceProfile::with_snr(12.0, 50.0);
        let a = render_recording(&cpu, &dev, None, 42).unwrap();
        let b = render_recording(&cpu, &dev, None, 42).unwrap();
        assert_eq!(a, b);
        let c = render_recording(&cpu, &dev, None, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn linear_in_load() {
        let cpu = make_class_signature("lin", 4.0, 10.0, 5).unwrap();
        let dev = DeviceProfile { rate_hz: 10.0, noise_std: 0.0, ..DeviceProfile::with_snr(12.0, 10.0) };
        let full = render_recording(&cpu, &dev, None, 0).unwrap();
        for alpha in [0.0, 0.3, 1.0] {
            let scaled = CpuPattern::new(cpu.values.iter().map(|v| v * alpha).collect(), 10.0).unwrap();
            let part = render_recording(&scaled, &dev, None, 0).unwrap();
            for (p, f) in part.mag.iter().zip(&full.mag) {
                for k in 0..3 {
                    let b = dev.baseline_field[k];
                    assert!(((p[k] - b) - alpha * (f[k] - b)).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn motion_rotates_field_and_reports_rate() {
        let cpu = CpuPattern::new(vec![0.0; 100], 100.0).unwrap();
        let dev = quiet(0.0);
        let dev = DeviceProfile { rate_hz: 100.0, ..dev };
        let motion = MotionScript {
            rotation_events: vec![RotationEvent {
                start_index: 10,
                duration_samples: 50,
                peak_rate_rad_s: 2.0,
                axis: [0.0, 0.0, 1.0],
            }],
        };
        let rec = render_recording(&cpu, &dev, Some(&motion), 0).unwrap();
        let gyro = rec.gyro.unwrap();
        let peak = gyro.iter().map(|g| g[2]).fold(0.0, f64::max);
        assert!((peak - 2.0).abs() < 0.01);
        // field magnitude preserved, direction changed
        let last = rec.mag[99];
        let norm = (last[0] * last[0] + last[1] * last[1] + last[2] * last[2]).sqrt();
        assert!((norm - 50.0).abs() < 1e-9);
        assert!(last[1].abs() > 1.0);
        assert_eq!(rec.mag[5], [50.0, 0.0, 0.0]);
        let bad = MotionScript {
            rotation_events: vec![RotationEvent { start_index: 90, ..motion.rotation_events[0].clone() }],
        };
        assert!(render_recording(&cpu, &dev, Some(&bad), 0).is_err());
    }

    #[test]
    fn invalid_profile_rejected() {
        let cpu = CpuPattern::new(vec![0.0, 1.0], 1.0).unwrap();
        let mut dev = quiet(1.0);
        dev.coupling_dir = [1.0, 1.0, 0.0];
        assert!(render_recording(&cpu, &dev, None, 0).is_err());
    }

    #[test]
    fn variation_without_variability_is_identity() {
        let sig = make_class_signature("v", 3.0, 100.0, 1).unwrap();
        assert_eq!(vary_pattern(&sig, &TraceVariability::none(), 9).unwrap(), sig);
        let v = vary_pattern(&sig, &TraceVariability::default(), 9).unwrap();
        assert_ne!(v, sig);
        assert_eq!(v, vary_pattern(&sig, &TraceVariability::default(), 9).unwrap());
    }

    #[test]
    fn snr_of_noiseless_idle_is_infinite() {
        let cpu = synth_square_pattern(1.0, 1.0, 3, 10.0).unwrap();
        let dev = DeviceProfile { rate_hz: 10.0, ..quiet(2.0) };
        let rec = render_recording(&cpu, &dev, None, 0).unwrap();
        assert_eq!(estimate_snr(&rec, &cpu).unwrap(), f64::INFINITY);
        let flat = CpuPattern::new(vec![1.0; 60], 10.0).unwrap();
        assert!(estimate_snr(&rec, &flat).is_err());
    }

    #[test]
    fn self_correlation_is_one() {
        let cpu = synth_square_pattern(2.0, 2.0, 5, 20.0).unwrap();
        let dev = DeviceProfile { rate_hz: 20.0, noise_std: 0.0, ..DeviceProfile::with_snr(12.0, 20.0) };
        let rec = render_recording(&cpu, &dev, None, 0).unwrap();
        assert!((pattern_correlation(&rec, &cpu).unwrap() - 1.0).abs() < 1e-9);
    }
}
