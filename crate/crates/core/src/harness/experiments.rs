//! Closed-world, open-world and sampling-rate experiments.

use serde::{Deserialize, Serialize};

use crate::classifier::{split_dataset, CvOutcome, ForestConfig, ForestModel, Prediction};
use crate::error::{Error, Result};
use crate::metrics::{confusion, precision_recall_f1, EvalReport, Scores};
use crate::trace::{Dataset, SensorRecording, Trace1D, UNMONITORED};

use super::config::ExperimentConfig;
use super::corpus::{effective_bins, feature_dataset, fit, preprocess_all, Corpus, Instance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedWorldReport {
    pub eval: EvalReport,
    /// Test accuracy per device, in device order.
    pub per_device_accuracy: Vec<Option<f64>>,
    pub forest: ForestConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvOutcome>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_features: usize,
    pub rate_hz: f64,
}

/// A rendered train/test split of the closed-world corpus.
pub(crate) struct RenderedSplit {
    pub corpus: Corpus,
    pub train: Dataset<Instance>,
    pub test: Dataset<Instance>,
    pub train_recordings: Vec<SensorRecording>,
    pub test_recordings: Vec<SensorRecording>,
}

pub(crate) fn render_split(cfg: &ExperimentConfig) -> Result<RenderedSplit> {
    let corpus = Corpus::numbered(cfg, "class", cfg.classes)?;
    let all = corpus.instances(cfg.traces_per_class);
    let (train, test) = split_dataset(&all, cfg.train_fraction, cfg.seed)?;
    let train_recordings = corpus.render_all(&instances(&train), cfg)?;
    let test_recordings = corpus.render_all(&instances(&test), cfg)?;
    Ok(RenderedSplit { corpus, train, test, train_recordings, test_recordings })
}

pub(crate) fn instances(data: &Dataset<Instance>) -> Vec<Instance> {
    data.items.iter().map(|(i, _)| *i).collect()
}

pub(crate) fn labeled(traces: Vec<Trace1D>, data: &Dataset<Instance>) -> Vec<(Trace1D, String)> {
    traces.into_iter().zip(data.items.iter().map(|(_, l)| l.clone())).collect()
}

pub(crate) struct Trained {
    pub model: ForestModel,
    pub forest: ForestConfig,
    pub cv: Option<CvOutcome>,
    pub bins: usize,
    pub train_traces: Vec<(Trace1D, String)>,
}

pub(crate) fn train_on(
    cfg: &ExperimentConfig,
    class_names: &[String],
    recordings: &[SensorRecording],
    data: &Dataset<Instance>,
    rate: Option<f64>,
) -> Result<Trained> {
    let traces = labeled(preprocess_all(recordings, rate)?, data);
    let shortest = traces.iter().map(|t| t.0.len()).min().ok_or_else(|| Error::invalid("no training traces"))?;
    let bins = effective_bins(cfg, shortest);
    let fitted = fit(cfg, &traces, class_names, bins)?;
    Ok(Trained { model: fitted.model, forest: fitted.config, cv: fitted.cv, bins, train_traces: traces })
}

pub(crate) fn predict_traces(model: &ForestModel, traces: &[(Trace1D, String)], bins: usize) -> Result<Vec<Prediction>> {
    let data = feature_dataset(traces, &model.class_names, bins)?;
    let features: Vec<_> = data.items.into_iter().map(|(f, _)| f).collect();
    model.predict_many(&features)
}

fn evaluate(
    trained: &Trained,
    split: &RenderedSplit,
    rate: Option<f64>,
) -> Result<ClosedWorldReport> {
    let test = labeled(preprocess_all(&split.test_recordings, rate)?, &split.test);
    let predictions = predict_traces(&trained.model, &test, trained.bins)?;
    let pairs = test.iter().zip(&predictions).map(|((_, t), p)| (t.as_str(), p.label.as_str()));
    let eval = EvalReport::from_confusion(confusion(pairs, &split.corpus.class_names)?);
    let per_device_accuracy = (0..split.corpus.devices.len())
        .map(|d| {
            let hits: Vec<bool> = split
                .test
                .items
                .iter()
                .zip(&predictions)
                .filter(|((inst, _), _)| inst.device == d)
                .map(|((_, label), p)| &p.label == label)
                .collect();
            (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
        })
        .collect();
    Ok(ClosedWorldReport {
        eval,
        per_device_accuracy,
        forest: trained.forest.clone(),
        cv: trained.cv.clone(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        n_features: trained.bins,
        rate_hz: rate.unwrap_or(split.corpus.devices[0].rate_hz),
    })
}

/// Known-start classification over the full class set.
pub fn run_closed_world(cfg: &ExperimentConfig) -> Result<ClosedWorldReport> {
    cfg.validate()?;
    let split = render_split(cfg)?;
    let rate = cfg.target_rate_hz;
    let trained = train_on(cfg, &split.corpus.class_names, &split.train_recordings, &split.train, rate)?;
    evaluate(&trained, &split, rate)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub rate_hz: f64,
    pub accuracy: f64,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub chance: f64,
    pub rows: Vec<SweepRow>,
}

/// Closed-world accuracy at each rate, with a shared corpus and split.
pub fn run_sampling_sweep(cfg: &ExperimentConfig, rates_hz: &[f64]) -> Result<SweepReport> {
    cfg.validate()?;
    let native = cfg.devices().iter().map(|d| d.rate_hz).fold(f64::INFINITY, f64::min);
    if let Some(r) = rates_hz.iter().find(|r| !(r.is_finite() && **r > 0.0 && **r <= native)) {
        return Err(Error::invalid(format!("sweep rate {r} Hz is not in (0, {native}]")));
    }
    let split = render_split(cfg)?;
    let mut rows = Vec::with_capacity(rates_hz.len());
    for &rate in rates_hz {
        let trained = train_on(cfg, &split.corpus.class_names, &split.train_recordings, &split.train, Some(rate))?;
        let report = evaluate(&trained, &split, Some(rate))?;
        rows.push(SweepRow { rate_hz: rate, accuracy: report.eval.accuracy, n_features: report.n_features });
    }
    Ok(SweepReport { chance: 1.0 / cfg.classes as f64, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpenWorldReport {
    /// Per-class results on the monitored classes only.
    pub monitored: EvalReport,
    pub mean_monitored_precision: Option<f64>,
    /// Micro-averaged scores over the monitored classes.
    pub pooled: Scores,
    pub n_test_monitored: usize,
    pub n_test_unmonitored: usize,
    pub n_test_background: usize,
}

/// Monitored classes plus a pooled `unmonitored` class in training; testing
/// adds traces of background classes never seen during training.
pub fn run_open_world(cfg: &ExperimentConfig) -> Result<OpenWorldReport> {
    cfg.validate()?;
    let ow = &cfg.open_world;
    let mut names = super::corpus::numbered_names("monitored", ow.monitored);
    names.extend(super::corpus::numbered_names("unmonitored", ow.unmonitored_train));
    let background_names = super::corpus::numbered_names("background", ow.background);
    names.extend(background_names.iter().cloned());
    let corpus = Corpus::new(cfg, names)?;
    let known = ow.monitored + ow.unmonitored_train;

    let monitored: Vec<String> = corpus.class_names[..ow.monitored].to_vec();
    let mut model_classes = monitored.clone();
    if ow.unmonitored_train > 0 || ow.background > 0 {
        model_classes.push(UNMONITORED.to_string());
    }
    let relabel = |class: usize| -> String {
        if class < ow.monitored {
            corpus.class_names[class].clone()
        } else {
            UNMONITORED.to_string()
        }
    };

    let all = corpus.instances(cfg.traces_per_class);
    let known_items: Vec<_> = all.items.iter().filter(|(i, _)| i.class < known).cloned().collect();
    let known_set = Dataset { items: known_items, class_names: corpus.class_names[..known].to_vec() };
    let (train, test) = split_dataset(&known_set, cfg.train_fraction, cfg.seed)?;
    let relabeled = |d: &Dataset<Instance>| Dataset {
        items: d.items.iter().map(|(i, _)| (*i, relabel(i.class))).collect(),
        class_names: model_classes.clone(),
    };
    let train = relabeled(&train);
    let mut test = relabeled(&test);
    for (b, _) in background_names.iter().enumerate() {
        for rep in 0..ow.background_traces {
            let inst = Instance { class: known + b, rep, device: rep % corpus.devices.len() };
            test.items.push((inst, UNMONITORED.to_string()));
        }
    }

    let train_recs = corpus.render_all(&instances(&train), cfg)?;
    let trained = train_on(cfg, &model_classes, &train_recs, &train, cfg.target_rate_hz)?;
    let test_recs = corpus.render_all(&instances(&test), cfg)?;
    let test_traces = labeled(preprocess_all(&test_recs, cfg.target_rate_hz)?, &test);
    let predictions = predict_traces(&trained.model, &test_traces, trained.bins)?;
    let pairs = test_traces.iter().zip(&predictions).map(|((_, t), p)| (t.as_str(), p.label.as_str()));
    let full = EvalReport::from_confusion(confusion(pairs, &model_classes)?);
    let restricted = full.restricted_to(&monitored);
    let count = |pred: &dyn Fn(&Instance) -> bool| test.items.iter().filter(|(i, _)| pred(i)).count();
    Ok(OpenWorldReport {
        mean_monitored_precision: restricted.macro_precision,
        pooled: precision_recall_f1(&restricted.pooled_counts()),
        monitored: restricted,
        n_test_monitored: count(&|i| i.class < ow.monitored),
        n_test_unmonitored: count(&|i| i.class >= ow.monitored && i.class < known),
        n_test_background: count(&|i| i.class >= known),
    })
}
