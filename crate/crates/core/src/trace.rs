//! Core data types and the JSON Lines recording format.
//!
//! Units are fixed: magnetometer samples in microtesla, gyroscope samples in
//! rad/s. Sampling is uniform and `rate_hz` is authoritative; there are no
//! per-sample timestamps.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 3-axis sample.
pub type Vec3 = [f64; 3];

/// Label reserved for the pooled background class of open-world experiments.
pub const UNMONITORED: &str = "unmonitored";

/// A labeled magnetometer (and optionally gyroscope) capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRecording {
    pub device_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub rate_hz: f64,
    pub mag: Vec<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gyro: Option<Vec<Vec3>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

impl SensorRecording {
    pub fn new(
        device_id: impl Into<String>,
        label: Option<String>,
        rate_hz: f64,
        mag: Vec<Vec3>,
        gyro: Option<Vec<Vec3>>,
    ) -> Result<Self> {
        let rec = SensorRecording {
            device_id: device_id.into(),
            label,
            rate_hz,
            mag,
            gyro,
            meta: BTreeMap::new(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::invalid(format!("rate_hz must be positive, got {}", self.rate_hz)));
        }
        if self.mag.is_empty() {
            return Err(Error::invalid("mag is empty"));
        }
        if let Some(i) = self.mag.iter().position(|s| !s.iter().all(|v| v.is_finite())) {
            return Err(Error::invalid(format!("mag sample {i} is not finite")));
        }
        if let Some(gyro) = &self.gyro {
            if gyro.len() != self.mag.len() {
                return Err(Error::invalid(format!(
                    "gyro length {} differs from mag length {}",
                    gyro.len(),
                    self.mag.len()
                )));
            }
            if let Some(i) = gyro.iter().position(|s| !s.iter().all(|v| v.is_finite())) {
                return Err(Error::invalid(format!("gyro sample {i} is not finite")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mag.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.mag.len() as f64 / self.rate_hz
    }
}

/// CPU utilization over time, each value a fraction in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpuPattern {
    pub values: Vec<f64>,
    pub rate_hz: f64,
}

impl CpuPattern {
    pub fn new(values: Vec<f64>, rate_hz: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("cpu pattern is empty"));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("rate_hz must be positive, got {rate_hz}")));
        }
        if let Some(i) = values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "cpu value {} at index {i} outside [0, 1]",
                values[i]
            )));
        }
        Ok(CpuPattern { values, rate_hz })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Linear-interpolation resampling onto a `rate_hz` grid covering the same duration.
    pub fn resample_linear(&self, rate_hz: f64) -> Result<CpuPattern> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(format!("rate_hz must be positive, got {rate_hz}")));
        }
        if rate_hz == self.rate_hz {
            return Ok(self.clone());
        }
        let n_out = ((self.len() as f64) * rate_hz / self.rate_hz).round().max(1.0) as usize;
        let ratio = self.rate_hz / rate_hz;
        let last = self.len() - 1;
        let values = (0..n_out)
            .map(|j| {
                let pos = j as f64 * ratio;
                let i0 = (pos.floor() as usize).min(last);
                let i1 = (i0 + 1).min(last);
                let frac = (pos - i0 as f64).clamp(0.0, 1.0);
                (self.values[i0] * (1.0 - frac) + self.values[i1] * frac).clamp(0.0, 1.0)
            })
            .collect();
        Ok(CpuPattern { values, rate_hz })
    }
}

/// A one-dimensional discrete-time trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace1D {
    pub values: Vec<f64>,
    pub rate_hz: f64,
    /// True iff every value is guaranteed to lie in `[0, 1]`.
    pub normalized: bool,
}

impl Trace1D {
    pub fn new(values: Vec<f64>, rate_hz: f64) -> Result<Self> {
        check_trace(&values, rate_hz)?;
        Ok(Trace1D {
            values,
            rate_hz,
            normalized: false,
        })
    }

    /// Wraps values already known to be in `[0, 1]`.
    pub fn new_normalized(values: Vec<f64>, rate_hz: f64) -> Result<Self> {
        check_trace(&values, rate_hz)?;
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("normalized trace has values outside [0, 1]"));
        }
        Ok(Trace1D {
            values,
            rate_hz,
            normalized: true,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Copies out `[start, end)` as a new unnormalized trace.
    pub fn window(&self, start: usize, end: usize) -> Result<Trace1D> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "window [{start}, {end}) outside trace of length {}",
                self.len()
            )));
        }
        Trace1D::new(self.values[start..end].to_vec(), self.rate_hz)
    }
}

fn check_trace(values: &[f64], rate_hz: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("trace is empty"));
    }
    if !(rate_hz.is_finite() && rate_hz > 0.0) {
        return Err(Error::invalid(format!("rate_hz must be positive, got {rate_hz}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("trace contains non-finite values"));
    }
    Ok(())
}

/// Labeled items plus the ordered set of class names.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub items: Vec<(T, String)>,
    pub class_names: Vec<String>,
}

impl<T> Dataset<T> {
    /// Builds a dataset whose class order is the order of first appearance.
    pub fn from_items(items: Vec<(T, String)>) -> Self {
        let mut class_names: Vec<String> = Vec::new();
        for (_, label) in &items {
            if !class_names.iter().any(|c| c == label) {
                class_names.push(label.clone());
            }
        }
        Dataset { items, class_names }
    }

    /// Builds a dataset with an explicit class order.
    pub fn with_classes(items: Vec<(T, String)>, class_names: Vec<String>) -> Result<Self> {
        let ds = Dataset { items, class_names };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, name) in self.class_names.iter().enumerate() {
            if self.class_names[..i].contains(name) {
                return Err(Error::invalid(format!("duplicate class name {name:?}")));
            }
        }
        for (_, label) in &self.items {
            if !self.class_names.contains(label) {
                return Err(Error::UnknownLabel(label.clone()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == label)
    }

    /// Item indices grouped per class, in class order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.class_names.len()];
        for (i, (_, label)) in self.items.iter().enumerate() {
            if let Some(c) = self.class_index(label) {
                groups[c].push(i);
            }
        }
        groups
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Dataset<U> {
        Dataset {
            items: self.items.into_iter().map(|(x, l)| (f(x), l)).collect(),
            class_names: self.class_names,
        }
    }
}

impl<T: Clone> Dataset<T> {
    /// Subset by item index, keeping the class list.
    pub fn select(&self, indices: &[usize]) -> Dataset<T> {
        Dataset {
            items: indices.iter().map(|&i| self.items[i].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

/// Reads a JSON Lines recording file. Any malformed or invalid record rejects
/// the whole file with the offending line number.
pub fn load_recordings(path: impl AsRef<Path>) -> Result<Vec<SensorRecording>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: SensorRecording =
            serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        rec.validate().map_err(|e| malformed(e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Writes recordings as JSON Lines. Numbers use the shortest representation
/// that round-trips exactly, so reloading reproduces every value bit for bit.
pub fn save_recordings(recordings: &[SensorRecording], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in recordings {
        serde_json::to_writer(&mut w, rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads any JSON document (configs, profiles, models) from disk.
pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes a pretty-printed JSON document followed by a newline.
pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
