//! Stratified splitting and grid-search cross-validation.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use super::forest::{train_forest, ForestConfig, MaxFeatures};
use crate::error::{Error, Result};
use crate::seed;
use crate::trace::Dataset;

const STREAM_SPLIT: u64 = 0x7370;
const STREAM_FOLDS: u64 = 0x666f;

/// Stratified train/test split. Each class sends `round(fraction · count)`
/// items (clamped to leave at least one on each side) to the training part.
/// Both parts keep the original item order.
pub fn split_dataset<T: Clone>(
    data: &Dataset<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Dataset<T>, Dataset<T>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train_fraction must be in (0, 1), got {train_fraction}")));
    }
    data.validate()?;
    let mut in_train = vec![false; data.len()];
    for (class, mut idx) in data.indices_by_class().into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: data.class_names[class].clone(),
                count: idx.len(),
                needed: 2,
            });
        }
        let mut rng = seed::rng(seed::derive(seed, &[STREAM_SPLIT, class as u64]));
        idx.shuffle(&mut rng);
        let k = ((train_fraction * idx.len() as f64).round() as usize).clamp(1, idx.len() - 1);
        for &i in &idx[..k] {
            in_train[i] = true;
        }
    }
    let (train, test): (Vec<usize>, Vec<usize>) = (0..data.len()).partition(|&i| in_train[i]);
    Ok((data.select(&train), data.select(&test)))
}

/// Assigns every item to one of `folds` folds, stratified by class.
pub fn stratified_folds<T>(data: &Dataset<T>, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    let mut assignment = vec![0; data.len()];
    for (class, mut idx) in data.indices_by_class().into_iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        if idx.len() < folds {
            return Err(Error::ClassTooSmall {
                label: data.class_names[class].clone(),
                count: idx.len(),
                needed: folds,
            });
        }
        let mut rng = seed::rng(seed::derive(seed, &[STREAM_FOLDS, class as u64]));
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Appends `1 − x` for every feature vector.
///
/// Window means are affine, so this equals extracting features from the
/// inverted normalized trace.
pub fn augment_features(data: &Dataset<FeatureVector>) -> Dataset<FeatureVector> {
    let mut items = data.items.clone();
    items.extend(data.items.iter().map(|(fv, label)| {
        (
            FeatureVector {
                values: fv.values.iter().map(|v| 1.0 - v).collect(),
                label: fv.label.clone(),
            },
            label.clone(),
        )
    }));
    Dataset { items, class_names: data.class_names.clone() }
}

/// Fraction of items whose predicted label matches.
pub fn accuracy(model: &super::ForestModel, data: &Dataset<FeatureVector>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot score an empty dataset"));
    }
    let features: Vec<FeatureVector> = data.items.iter().map(|(f, _)| f.clone()).collect();
    let predictions = model.predict_many(&features)?;
    let correct = predictions
        .iter()
        .zip(&data.items)
        .filter(|(p, (_, label))| &p.label == label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub folds: usize,
    pub seed: u64,
    /// Add inverted copies of the training folds (never of the held-out fold).
    pub augment_inverse: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions { folds: 5, seed: 0, augment_inverse: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOutcome {
    pub best: ForestConfig,
    pub best_index: usize,
    pub mean_accuracy: Vec<f64>,
    pub fold_accuracy: Vec<Vec<f64>>,
}

/// Stratified k-fold grid search; returns the config with the highest mean
/// held-out accuracy, first in grid order on ties.
pub fn cross_validate_grid(
    train: &Dataset<FeatureVector>,
    grid: &[ForestConfig],
    options: &CvOptions,
) -> Result<CvOutcome> {
    if grid.is_empty() {
        return Err(Error::invalid("grid is empty"));
    }
    let assignment = stratified_folds(train, options.folds, options.seed)?;
    let mut fold_accuracy = Vec::with_capacity(grid.len());
    for config in grid {
        let mut per_fold = Vec::with_capacity(options.folds);
        for fold in 0..options.folds {
            let (fit, held): (Vec<usize>, Vec<usize>) =
                (0..train.len()).partition(|&i| assignment[i] != fold);
            let mut fit = train.select(&fit);
            if options.augment_inverse {
                fit = augment_features(&fit);
            }
            let model = train_forest(&fit, config)?;
            per_fold.push(accuracy(&model, &train.select(&held))?);
        }
        fold_accuracy.push(per_fold);
    }
    let mean_accuracy: Vec<f64> = fold_accuracy
        .iter()
        .map(|f| f.iter().sum::<f64>() / f.len() as f64)
        .collect();
    let mut best_index = 0;
    for (i, m) in mean_accuracy.iter().enumerate() {
        if *m > mean_accuracy[best_index] {
            best_index = i;
        }
    }
    Ok(CvOutcome {
        best: grid[best_index].clone(),
        best_index,
        mean_accuracy,
        fold_accuracy,
    })
}

/// The default hyperparameter grid (24 points, containing the default config).
pub fn default_grid(seed: u64) -> Vec<ForestConfig> {
    let mut grid = Vec::new();
    for n_estimators in [100, 500, 1100] {
        for max_features in [MaxFeatures::Log2, MaxFeatures::Sqrt] {
            for max_depth in [10, 50] {
                for min_impurity_decrease in [0.0, 1e-4] {
                    grid.push(ForestConfig {
                        n_estimators,
                        max_features,
                        max_depth,
                        min_impurity_decrease,
                        bootstrap: true,
                        seed,
                    });
                }
            }
        }
    }
    grid
}
