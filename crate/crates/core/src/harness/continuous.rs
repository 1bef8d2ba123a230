//! Target detection in continuous recordings.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{average_pattern, detect_and_classify, match_detections, score_detections, Detection};
use crate::error::{Error, Result};
use crate::metrics::{confusion, precision_recall_f1, ConfusionCounts, EvalReport};
use crate::par;
use crate::preprocess::preprocess_recording;
use crate::seed;
use crate::simulator::render_recording;
use crate::trace::{CpuPattern, SensorRecording, Trace1D};

use super::config::ExperimentConfig;
use super::corpus::{Corpus, Instance};
use super::corpus::preprocess_all;
use super::experiments::{labeled, predict_traces, render_split, train_on};

const STREAM_LAYOUT: u64 = 0x6c79;
const STREAM_STREAM_NOISE: u64 = 0x736e;

/// One embedded activity inside a stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embed {
    pub start_index: usize,
    pub label: String,
    pub is_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamOutcome {
    pub embeds: Vec<Embed>,
    pub detections: Vec<Detection>,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousReport {
    pub target: String,
    pub counts: ConfusionCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Share of all detections (false positives included) whose predicted
    /// label equals the activity started at that point.
    pub classify_at_peaks_accuracy: Option<f64>,
    /// Known-start accuracy of the same model on the closed-world test split.
    pub closed_world_accuracy: f64,
    pub n_detections: usize,
    pub streams: Vec<StreamOutcome>,
}

/// Picks non-overlapping start offsets for `count` embeds of `len` samples.
fn layout(rng: &mut impl Rng, count: usize, len: usize, stream_len: usize) -> Result<Vec<usize>> {
    let needed = count * len;
    if needed > stream_len {
        return Err(Error::invalid(format!(
            "{count} activities of {len} samples do not fit in a stream of {stream_len}"
        )));
    }
    let slack = stream_len - needed;
    let mut points: Vec<usize> = (0..count).map(|_| rng.random_range(0..=slack)).collect();
    points.sort_unstable();
    Ok(points.iter().enumerate().map(|(i, p)| p + i * len).collect())
}

pub fn run_continuous(cfg: &ExperimentConfig) -> Result<ContinuousReport> {
    cfg.validate()?;
    let cc = &cfg.continuous;
    let split = render_split(cfg)?;
    let names = &split.corpus.class_names;
    let trained = train_on(cfg, names, &split.train_recordings, &split.train, None)?;

    let test_traces = labeled(preprocess_all(&split.test_recordings, None)?, &split.test);
    let predictions = predict_traces(&trained.model, &test_traces, trained.bins)?;
    let pairs = test_traces.iter().zip(&predictions).map(|((_, t), p)| (t.as_str(), p.label.as_str()));
    let closed_world_accuracy = EvalReport::from_confusion(confusion(pairs, names)?).accuracy;

    let target = names[cc.target_class].clone();
    let target_traces: Vec<Trace1D> = trained
        .train_traces
        .iter()
        .filter(|(_, l)| *l == target)
        .map(|(t, _)| t.clone())
        .collect();
    let pattern = average_pattern(&target_traces, &target)?;

    let rate = split.corpus.devices[0].rate_hz;
    let streams = par::try_map_range(cc.streams, |s| -> Result<StreamOutcome> {
        let (rec, embeds) = render_stream(cfg, &split.corpus, s)?;
        let stream = preprocess_recording(&rec, None)?;
        let detections = detect_and_classify(&stream, &pattern, &cc.thresholds, &trained.model, cc.window_s)?;
        let truth: Vec<(usize, String)> =
            embeds.iter().filter(|e| e.is_target).map(|e| (e.start_index, e.label.clone())).collect();
        let counts = score_detections(&detections, &truth, cc.tolerance_s, rate);
        Ok(StreamOutcome { embeds, detections, counts })
    })?;

    let counts = streams.iter().fold(ConfusionCounts::default(), |a, s| a + s.counts);
    let scores = precision_recall_f1(&counts);
    let (correct, total) = streams.iter().fold((0usize, 0usize), |(c, t), s| {
        let c_s = classify_hits(s, cc.tolerance_s, rate);
        (c + c_s, t + s.detections.len())
    });
    Ok(ContinuousReport {
        target,
        counts,
        precision: scores.precision,
        recall: scores.recall,
        classify_at_peaks_accuracy: (total > 0).then(|| correct as f64 / total as f64),
        closed_world_accuracy,
        n_detections: total,
        streams,
    })
}

/// Stream `index` of the continuous scenario: the target and the distractors
/// at random non-overlapping offsets, rendered on the primary device. The
/// recording is labeled with the target class.
pub fn render_stream(cfg: &ExperimentConfig, corpus: &Corpus, index: usize) -> Result<(SensorRecording, Vec<Embed>)> {
    let cc = &cfg.continuous;
    let names = &corpus.class_names;
    if cc.target_class >= names.len() || cc.distractors >= names.len() {
        return Err(Error::invalid("not enough classes for the requested stream"));
    }
    let device = &corpus.devices[0];
    let rate = device.rate_hz;
    let stream_len = (cc.stream_s * rate).round() as usize;
    let mut rng = seed::rng(seed::derive(cfg.seed, &[STREAM_LAYOUT, index as u64]));
    let mut others: Vec<usize> = (0..names.len()).filter(|&c| c != cc.target_class).collect();
    others.shuffle(&mut rng);
    let mut classes = vec![cc.target_class];
    classes.extend(others.into_iter().take(cc.distractors));
    classes.shuffle(&mut rng);

    let activities: Vec<CpuPattern> = classes
        .iter()
        .map(|&class| {
            // repetitions beyond the corpus keep streams disjoint from training traces
            let inst = Instance { class, rep: cfg.traces_per_class + index, device: 0 };
            corpus.activity(&inst, cfg)?.resample_linear(rate)
        })
        .collect::<Result<_>>()?;
    let len = activities.iter().map(|a| a.len()).max().unwrap_or(0);
    let starts = layout(&mut rng, classes.len(), len, stream_len)?;
    let mut cpu = vec![0.0; stream_len];
    for (a, &start) in activities.iter().zip(&starts) {
        cpu[start..start + a.len()].copy_from_slice(&a.values);
    }
    let cpu = CpuPattern::new(cpu, rate)?;
    let mut rec = render_recording(&cpu, device, None, seed::derive(cfg.seed, &[STREAM_STREAM_NOISE, index as u64]))?;
    rec.device_id = "device-0".to_string();
    rec.label = Some(names[cc.target_class].clone());
    let embeds: Vec<Embed> = classes
        .iter()
        .zip(&starts)
        .map(|(&c, &start)| Embed { start_index: start, label: names[c].clone(), is_target: c == cc.target_class })
        .collect();
    Ok((rec, embeds))
}

/// Detections matched to an embedded activity whose label the classifier got right.
fn classify_hits(s: &StreamOutcome, tolerance_s: f64, rate: f64) -> usize {
    let starts: Vec<usize> = s.embeds.iter().map(|e| e.start_index).collect();
    match_detections(&s.detections, &starts, tolerance_s, rate)
        .iter()
        .zip(&s.detections)
        .filter(|(m, d)| match m {
            Some(j) => d.predicted_label.as_deref() == Some(s.embeds[*j].label.as_str()),
            None => false,
        })
        .count()
}
