//! Locating a target activity inside a continuous stream.
//!
//! An averaged, mean-centered activity pattern is slid over the stream as a
//! matched filter; local maxima of the correlation that pass height,
//! prominence and width thresholds become candidate start points, which can
//! then be classified individually.

use serde::{Deserialize, Serialize};

use crate::classifier::{extract_features, ForestModel};
use crate::error::{Error, Result};
use crate::metrics::ConfusionCounts;
use crate::par;
use crate::preprocess::normalize_unit_range;
use crate::trace::Trace1D;

/// Default classification window after a detected start, seconds.
pub const DEFAULT_WINDOW_S: f64 = 12.0;
/// Default matching tolerance between detection and ground truth, seconds.
pub const DEFAULT_TOLERANCE_S: f64 = 1.0;

/// Mean of several traces of one activity, centered to zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityPattern {
    pub values: Vec<f64>,
    pub rate_hz: f64,
    pub class_label: String,
}

impl ActivityPattern {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn average_pattern(traces: &[Trace1D], class_label: &str) -> Result<ActivityPattern> {
    let first = traces.first().ok_or_else(|| Error::invalid("need at least one trace"))?;
    let n = first.len();
    for t in traces {
        if t.len() != n || t.rate_hz != first.rate_hz {
            return Err(Error::invalid("traces must share length and rate"));
        }
        if !t.normalized {
            return Err(Error::invalid("pattern traces must be normalized"));
        }
    }
    let mut values = vec![0.0; n];
    for t in traces {
        for (acc, v) in values.iter_mut().zip(&t.values) {
            *acc += v;
        }
    }
    let k = traces.len() as f64;
    values.iter_mut().for_each(|v| *v /= k);
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    Ok(ActivityPattern { values, rate_hz: first.rate_hz, class_label: class_label.to_string() })
}

/// Correlation value for every admissible lag `k = 0 ..= len(stream) − len(pattern)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSeries {
    pub values: Vec<f64>,
    pub rate_hz: f64,
}

/// `c[k] = Σ_n (t[n+k] − mean(t)) · p[n]`.
pub fn cross_correlate(stream: &Trace1D, pattern: &ActivityPattern) -> Result<CorrelationSeries> {
    cross_correlate_with(stream, pattern, true)
}

/// Cross-correlation with optional stream centering; `center_stream = false`
/// gives the formula-literal `Σ_n t[n+k] · p[n]`.
pub fn cross_correlate_with(
    stream: &Trace1D,
    pattern: &ActivityPattern,
    center_stream: bool,
) -> Result<CorrelationSeries> {
    if pattern.is_empty() {
        return Err(Error::invalid("pattern is empty"));
    }
    if pattern.len() > stream.len() {
        return Err(Error::invalid(format!(
            "pattern ({} samples) is longer than the stream ({} samples)",
            pattern.len(),
            stream.len()
        )));
    }
    if pattern.rate_hz != stream.rate_hz {
        return Err(Error::invalid(format!(
            "rate mismatch: stream {} Hz, pattern {} Hz",
            stream.rate_hz, pattern.rate_hz
        )));
    }
    let offset = if center_stream { stream.mean() } else { 0.0 };
    let centered: Vec<f64> = stream.values.iter().map(|v| v - offset).collect();
    let lags = stream.len() - pattern.len() + 1;
    let values = par::map_range(lags, |k| {
        centered[k..k + pattern.len()]
            .iter()
            .zip(&pattern.values)
            .map(|(t, p)| t * p)
            .sum()
    });
    Ok(CorrelationSeries { values, rate_hz: stream.rate_hz })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeakThresholds {
    pub min_height: f64,
    pub min_prominence: f64,
    pub min_width_samples: usize,
}

impl PeakThresholds {
    /// Thresholds calibrated on the default continuous-usage simulation
    /// (normalized stream, 100 Hz, 12 s pattern).
    pub fn calibrated() -> Self {
        PeakThresholds { min_height: 13.0, min_prominence: 8.0, min_width_samples: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_width_samples == 0 {
            return Err(Error::invalid("min_width_samples must be at least 1"));
        }
        Ok(())
    }
}

impl Default for PeakThresholds {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Shape measurements of one local maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
    pub prominence: f64,
    pub width_samples: usize,
}

/// All local maxima with their prominence and width, in ascending index order.
///
/// A plateau reports its center. The prominence is measured against the
/// higher of the two lowest points separating the peak from higher terrain
/// (or the series ends); an earlier peak of equal height counts as higher.
/// The width is the number of contiguous samples above `height − prominence/2`.
pub fn local_peaks(values: &[f64]) -> Vec<Peak> {
    let n = values.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i - 1] < values[i] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                peaks.push(measure(values, i, j));
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

fn measure(values: &[f64], start: usize, end: usize) -> Peak {
    let h = values[start];
    let mut left_min = h;
    let mut k = start;
    while k > 0 {
        k -= 1;
        if values[k] >= h {
            break;
        }
        left_min = left_min.min(values[k]);
    }
    let mut right_min = h;
    for &v in &values[end + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    let prominence = h - left_min.max(right_min);
    let level = h - prominence / 2.0;
    let mut lo = start;
    while lo > 0 && values[lo - 1] > level {
        lo -= 1;
    }
    let mut hi = end;
    while hi + 1 < values.len() && values[hi + 1] > level {
        hi += 1;
    }
    Peak { index: (start + end) / 2, height: h, prominence, width_samples: hi - lo + 1 }
}

/// Indices of peaks passing all three thresholds, ascending.
pub fn find_peaks(series: &CorrelationSeries, thresholds: &PeakThresholds) -> Vec<usize> {
    local_peaks(&series.values)
        .into_iter()
        .filter(|p| {
            p.height >= thresholds.min_height
                && p.prominence >= thresholds.min_prominence
                && p.width_samples >= thresholds.min_width_samples
        })
        .map(|p| p.index)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub time_index: usize,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<String>,
}

/// Candidate start points without classification.
pub fn detect(stream: &Trace1D, pattern: &ActivityPattern, thresholds: &PeakThresholds) -> Result<Vec<Detection>> {
    thresholds.validate()?;
    let series = cross_correlate(stream, pattern)?;
    Ok(find_peaks(&series, thresholds)
        .into_iter()
        .map(|k| Detection { time_index: k, score: series.values[k], predicted_label: None })
        .collect())
}

/// Detects candidate starts and classifies the `window_s` seconds after each.
/// Windows running past the end of the stream are dropped.
pub fn detect_and_classify(
    stream: &Trace1D,
    pattern: &ActivityPattern,
    thresholds: &PeakThresholds,
    model: &ForestModel,
    window_s: f64,
) -> Result<Vec<Detection>> {
    if !(window_s > 0.0) {
        return Err(Error::invalid("window_s must be positive"));
    }
    let window = (window_s * stream.rate_hz).round() as usize;
    let candidates: Vec<Detection> = detect(stream, pattern, thresholds)?
        .into_iter()
        .filter(|d| d.time_index + window <= stream.len())
        .collect();
    par::try_map_slice(&candidates, |d| {
        let cut = stream.window(d.time_index, d.time_index + window)?;
        let features = extract_features(&normalize_unit_range(&cut)?, model.n_features)?;
        let prediction = model.predict(&features)?;
        Ok(Detection { predicted_label: Some(prediction.label), ..d.clone() })
    })
}

/// Greedy one-to-one matching in descending score order: each detection takes
/// the nearest unmatched truth event within the tolerance. Returns, for every
/// detection, the index of its matched truth event.
pub fn match_detections(
    detections: &[Detection],
    truth: &[usize],
    tolerance_s: f64,
    rate_hz: f64,
) -> Vec<Option<usize>> {
    let tolerance = tolerance_s * rate_hz;
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| {
        detections[b]
            .score
            .total_cmp(&detections[a].score)
            .then(detections[a].time_index.cmp(&detections[b].time_index))
    });
    let mut taken = vec![false; truth.len()];
    let mut matched = vec![None; detections.len()];
    for d in order {
        let t = detections[d].time_index as f64;
        let best = (0..truth.len())
            .filter(|&j| !taken[j] && (truth[j] as f64 - t).abs() <= tolerance)
            .min_by(|&a, &b| {
                (truth[a] as f64 - t)
                    .abs()
                    .total_cmp(&(truth[b] as f64 - t).abs())
                    .then(a.cmp(&b))
            });
        if let Some(j) = best {
            taken[j] = true;
            matched[d] = Some(j);
        }
    }
    matched
}

/// TP / FP / FN of detections against ground-truth start indices.
pub fn score_detections(
    detections: &[Detection],
    truth: &[(usize, String)],
    tolerance_s: f64,
    rate_hz: f64,
) -> ConfusionCounts {
    let starts: Vec<usize> = truth.iter().map(|t| t.0).collect();
    let matched = match_detections(detections, &starts, tolerance_s, rate_hz);
    let tp = matched.iter().filter(|m| m.is_some()).count() as u64;
    ConfusionCounts::new(tp, detections.len() as u64 - tp, truth.len() as u64 - tp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: &[f64]) -> CorrelationSeries {
        CorrelationSeries { values: v.to_vec(), rate_hz: 1.0 }
    }

    fn pattern(v: &[f64]) -> ActivityPattern {
        ActivityPattern { values: v.to_vec(), rate_hz: 1.0, class_label: "p".into() }
    }

    fn det(t: usize, score: f64) -> Detection {
        Detection { time_index: t, score, predicted_label: None }
    }

    #[test]
    fn averaging() {
        let t = |v: &[f64]| Trace1D::new_normalized(v.to_vec(), 1.0).unwrap();
        assert_eq!(average_pattern(&[t(&[0.0, 1.0])], "a").unwrap().values, vec![-0.5, 0.5]);
        assert_eq!(average_pattern(&[t(&[0.0, 1.0]), t(&[1.0, 0.0])], "a").unwrap().values, vec![0.0, 0.0]);
        assert!(average_pattern(&[t(&[0.0, 1.0]), t(&[1.0])], "a").is_err());
        assert!(average_pattern(&[], "a").is_err());
    }

    #[test]
    fn correlation_examples() {
        let s = Trace1D::new(vec![1.0, 2.0, 3.0], 1.0).unwrap();
        let c = cross_correlate(&s, &pattern(&[-0.5, 0.5])).unwrap();
        assert_eq!(c.values, vec![0.5, 0.5]);
        let c = cross_correlate(&s, &pattern(&[1.0])).unwrap();
        assert_eq!(c.values, vec![-1.0, 0.0, 1.0]);
        let raw = cross_correlate_with(&s, &pattern(&[-0.5, 0.5]), false).unwrap();
        assert_eq!(raw.values, vec![0.5, 0.5]);
        assert!(cross_correlate(&s, &pattern(&[1.0; 4])).is_err());
        let other_rate = ActivityPattern { rate_hz: 2.0, ..pattern(&[1.0]) };
        assert!(cross_correlate(&s, &other_rate).is_err());
    }

    #[test]
    fn peak_examples() {
        let t = PeakThresholds { min_height: 0.5, min_prominence: 0.5, min_width_samples: 1 };
        assert_eq!(find_peaks(&series(&[0.0, 1.0, 0.0]), &t), vec![1]);
        assert_eq!(find_peaks(&series(&[0.0, 1.0, 0.9, 1.0, 0.0]), &t), vec![1]);
        assert!(find_peaks(&series(&[0.0, 1.0, 2.0, 3.0]), &t).is_empty());
    }

    #[test]
    fn peak_measurements() {
        let p = local_peaks(&[0.0, 1.0, 0.9, 1.0, 0.0]);
        assert_eq!(p.len(), 2);
        assert_eq!(p[0].prominence, 1.0);
        assert!((p[1].prominence - 0.1).abs() < 1e-12);
        let plateau = local_peaks(&[0.0, 2.0, 2.0, 2.0, 0.0]);
        assert_eq!(plateau[0].index, 2);
        assert_eq!(plateau[0].width_samples, 3);
        let wide = local_peaks(&[0.0, 0.6, 0.8, 1.0, 0.7, 0.2, 0.0]);
        // level 0.5: samples 1..=4 exceed it
        assert_eq!(wide[0].width_samples, 4);
    }

    #[test]
    fn width_threshold_filters_spikes() {
        let t = PeakThresholds { min_height: 0.0, min_prominence: 0.0, min_width_samples: 2 };
        assert!(find_peaks(&series(&[0.0, 1.0, 0.0]), &t).is_empty());
    }

    #[test]
    fn scoring_rules() {
        let truth = vec![(100, "t".to_string())];
        assert_eq!(score_detections(&[det(100, 1.0)], &truth, 1.0, 10.0), ConfusionCounts::new(1, 0, 0));
        assert_eq!(score_detections(&[det(120, 1.0)], &truth, 1.0, 10.0), ConfusionCounts::new(0, 1, 1));
        assert_eq!(
            score_detections(&[det(95, 1.0), det(104, 2.0)], &truth, 1.0, 10.0),
            ConfusionCounts::new(1, 1, 0)
        );
        let m = match_detections(&[det(95, 1.0), det(104, 2.0)], &[100], 1.0, 10.0);
        assert_eq!(m, vec![None, Some(0)]);
    }
}
