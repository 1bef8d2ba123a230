//! Binned-mean features and a random forest trained from scratch.

mod features;
mod forest;
mod validation;

pub use features::{extract_features, FeatureVector, DEFAULT_BIN_COUNT};
pub use forest::{
    load_model, save_model, train_forest, ForestConfig, ForestModel, MaxFeatures, Node, Prediction,
    Tree, SPLIT_TIE_EPS,
};
pub use validation::{
    accuracy, augment_features, cross_validate_grid, default_grid, split_dataset, stratified_folds,
    CvOptions, CvOutcome,
};
