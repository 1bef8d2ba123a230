//! Synthetic trace corpora shared by the scenarios.

use crate::classifier::{
    cross_validate_grid, default_grid, extract_features, train_forest, CvOptions,
    CvOutcome, FeatureVector, ForestConfig, ForestModel,
};
use crate::error::Result;
use crate::par;
use crate::preprocess::{augment_with_inverse, preprocess_recording};
use crate::seed;
use crate::simulator::{make_class_signature_with, render_recording, vary_pattern, DeviceProfile, MotionScript};
use crate::trace::{CpuPattern, Dataset, SensorRecording, Trace1D};

use super::config::ExperimentConfig;

const STREAM_VARIANT: u64 = 0x7661;
const STREAM_RENDER: u64 = 0x726e;

/// One trace to be rendered: which class, which repetition, which device.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Instance {
    pub class: usize,
    pub rep: usize,
    pub device: usize,
}

pub struct Corpus {
    pub class_names: Vec<String>,
    pub signatures: Vec<CpuPattern>,
    pub devices: Vec<DeviceProfile>,
    pub seed: u64,
}

impl Corpus {
    pub fn new(cfg: &ExperimentConfig, class_names: Vec<String>) -> Result<Corpus> {
        let signatures = par::try_map_slice(&class_names, |name| {
            make_class_signature_with(&cfg.signature, name, cfg.duration_s, cfg.rate_hz, cfg.seed)
        })?;
        Ok(Corpus { class_names, signatures, devices: cfg.devices(), seed: cfg.seed })
    }

    pub fn numbered(cfg: &ExperimentConfig, prefix: &str, count: usize) -> Result<Corpus> {
        Corpus::new(cfg, numbered_names(prefix, count))
    }

    /// `per_class` repetitions of every class, devices assigned round-robin.
    pub fn instances(&self, per_class: usize) -> Dataset<Instance> {
        let mut items = Vec::with_capacity(self.class_names.len() * per_class);
        for class in 0..self.class_names.len() {
            for rep in 0..per_class {
                let inst = Instance { class, rep, device: rep % self.devices.len() };
                items.push((inst, self.class_names[class].clone()));
            }
        }
        Dataset { items, class_names: self.class_names.clone() }
    }

    /// The CPU activity of one instance (a varied copy of its class signature).
    pub fn activity(&self, inst: &Instance, cfg: &ExperimentConfig) -> Result<CpuPattern> {
        let key = seed::derive(self.seed, &[STREAM_VARIANT, inst.class as u64, inst.rep as u64]);
        vary_pattern(&self.signatures[inst.class], &cfg.variability, key)
    }

    pub fn render_key(&self, inst: &Instance) -> u64 {
        seed::derive(self.seed, &[STREAM_RENDER, inst.class as u64, inst.rep as u64])
    }

    pub fn render(
        &self,
        inst: &Instance,
        cfg: &ExperimentConfig,
        device: &DeviceProfile,
        motion: Option<&MotionScript>,
    ) -> Result<SensorRecording> {
        let cpu = self.activity(inst, cfg)?;
        let mut rec = render_recording(&cpu, device, motion, self.render_key(inst))?;
        rec.device_id = format!("device-{}", inst.device);
        rec.label = Some(self.class_names[inst.class].clone());
        Ok(rec)
    }

    pub fn render_all(&self, instances: &[Instance], cfg: &ExperimentConfig) -> Result<Vec<SensorRecording>> {
        par::try_map_slice(instances, |inst| self.render(inst, cfg, &self.devices[inst.device], None))
    }
}

pub fn numbered_names(prefix: &str, count: usize) -> Vec<String> {
    let width = count.saturating_sub(1).to_string().len().max(2);
    (0..count).map(|i| format!("{prefix}-{i:0width$}")).collect()
}

/// Bin count usable for traces of `len` samples.
pub fn effective_bins(cfg: &ExperimentConfig, len: usize) -> usize {
    cfg.bin_count.min(len).max(1)
}

pub fn preprocess_all(recordings: &[SensorRecording], target_rate_hz: Option<f64>) -> Result<Vec<Trace1D>> {
    par::try_map_slice(recordings, |r| preprocess_recording(r, target_rate_hz))
}

pub fn features_of(traces: &[Trace1D], bins: usize) -> Result<Vec<FeatureVector>> {
    par::try_map_slice(traces, |t| extract_features(t, bins))
}

/// Training features with the inverse of every trace added.
pub fn augmented_training_set(
    traces: &[(Trace1D, String)],
    class_names: &[String],
    bins: usize,
) -> Result<Dataset<FeatureVector>> {
    let pairs = par::try_map_slice(traces, |(t, label)| -> Result<_> {
        let (orig, inv) = augment_with_inverse(t)?;
        Ok([
            (extract_features(&orig, bins)?, label.clone()),
            (extract_features(&inv, bins)?, label.clone()),
        ])
    })?;
    let mut items: Vec<(FeatureVector, String)> = Vec::with_capacity(pairs.len() * 2);
    let (orig, inv): (Vec<_>, Vec<_>) = pairs.into_iter().map(|[a, b]| (a, b)).unzip();
    items.extend(orig);
    items.extend(inv);
    Ok(Dataset { items, class_names: class_names.to_vec() })
}

pub struct TrainedModel {
    pub model: ForestModel,
    pub config: ForestConfig,
    pub cv: Option<CvOutcome>,
}

/// Optional grid-search CV (on un-augmented features, augmenting the fitting
/// folds only), then a final fit on the augmented training set.
pub fn fit(
    cfg: &ExperimentConfig,
    train: &[(Trace1D, String)],
    class_names: &[String],
    bins: usize,
) -> Result<TrainedModel> {
    let (config, cv) = if cfg.grid_search {
        let features = features_of(&train.iter().map(|t| t.0.clone()).collect::<Vec<_>>(), bins)?;
        let plain = Dataset {
            items: features.into_iter().zip(train.iter().map(|t| t.1.clone())).collect(),
            class_names: class_names.to_vec(),
        };
        let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(cfg.forest.seed));
        let outcome = cross_validate_grid(
            &plain,
            &grid,
            &CvOptions { folds: cfg.cv_folds, seed: cfg.seed, augment_inverse: true },
        )?;
        (outcome.best.clone(), Some(outcome))
    } else {
        (cfg.forest.clone(), None)
    };
    let data = augmented_training_set(train, class_names, bins)?;
    let model = train_forest(&data, &config)?;
    Ok(TrainedModel { model, config, cv })
}

/// Plain feature dataset (no augmentation), e.g. for scoring.
pub fn feature_dataset(
    traces: &[(Trace1D, String)],
    class_names: &[String],
    bins: usize,
) -> Result<Dataset<FeatureVector>> {
    let features = features_of(&traces.iter().map(|t| t.0.clone()).collect::<Vec<_>>(), bins)?;
    Ok(Dataset {
        items: features.into_iter().zip(traces.iter().map(|t| t.1.clone())).collect(),
        class_names: class_names.to_vec(),
    })
}

