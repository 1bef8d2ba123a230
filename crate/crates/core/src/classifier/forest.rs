//! CART random forest with Gini impurity and bootstrap aggregation.
//!
//! Splits send `x[feature] <= threshold` to the left child. Thresholds sit at
//! midpoints between consecutive distinct values. The impurity decrease of a
//! split is weighted by the node's share of the tree's training sample, and a
//! node stays a leaf when its best decrease falls below `min_impurity_decrease`.
//! Unlisted settings follow the usual library defaults: minimum leaf size 1,
//! minimum split size 2, no class weights.

use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::features::FeatureVector;
use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::trace::{read_json, write_json, Dataset};

const STREAM_TREE: u64 = 0x7472;
const STREAM_BOOTSTRAP: u64 = 0x6273;
const STREAM_NODE: u64 = 0x6e64;

/// Splits whose impurity decreases differ by less than this are ties; the
/// first one in (feature index, threshold) order wins.
pub const SPLIT_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    Log2,
    Sqrt,
    All,
}

impl MaxFeatures {
    /// Number of candidate features drawn per node for `dim` features.
    pub fn resolve(self, dim: usize) -> usize {
        let k = match self {
            MaxFeatures::Log2 => (dim as f64).log2().ceil() as usize,
            MaxFeatures::Sqrt => (dim as f64).sqrt().ceil() as usize,
            MaxFeatures::All => dim,
        };
        k.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_estimators: usize,
    pub max_features: MaxFeatures,
    pub max_depth: usize,
    pub min_impurity_decrease: f64,
    #[serde(default = "default_true")]
    pub bootstrap: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for ForestConfig {
    /// 1100 trees, log2 candidate features, depth 50, minimum decrease 1e-4.
    fn default() -> Self {
        ForestConfig {
            n_estimators: 1100,
            max_features: MaxFeatures::Log2,
            max_depth: 50,
            min_impurity_decrease: 1e-4,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::invalid("n_estimators must be at least 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if !(self.min_impurity_decrease >= 0.0) {
            return Err(Error::invalid("min_impurity_decrease must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class-count histogram of the training samples reaching the leaf.
    Leaf { counts: Vec<f64> },
}

/// A decision tree stored as a flat node list; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_for(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub class_names: Vec<String>,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label: String,
    pub class_index: usize,
    /// Aligned with the model's `class_names`.
    pub probabilities: Vec<f64>,
}

impl Prediction {
    pub fn probability(&self, class_names: &[String], label: &str) -> Option<f64> {
        class_names
            .iter()
            .position(|c| c == label)
            .map(|i| self.probabilities[i])
    }
}

struct TrainingData<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<usize>,
    n_classes: usize,
    dim: usize,
}

/// Trains a forest; the result depends only on the dataset contents and
/// `config`, never on item order or thread count.
pub fn train_forest(train: &Dataset<FeatureVector>, config: &ForestConfig) -> Result<ForestModel> {
    config.validate()?;
    train.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let dim = train.items[0].0.len();
    if dim == 0 {
        return Err(Error::invalid("feature vectors are empty"));
    }
    for (fv, _) in &train.items {
        if fv.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: fv.len(),
            });
        }
        if fv.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature vectors must be finite"));
        }
    }

    // Canonical order: (class index, lexicographic features).
    let mut order: Vec<(usize, &[f64])> = train
        .items
        .iter()
        .map(|(fv, label)| (train.class_index(label).expect("validated"), fv.values.as_slice()))
        .collect();
    order.sort_by(|a, b| {
        a.0.cmp(&b.0).then_with(|| {
            a.1.iter()
                .zip(b.1)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let data = TrainingData {
        labels: order.iter().map(|o| o.0).collect(),
        rows: order.iter().map(|o| o.1).collect(),
        n_classes: train.class_names.len(),
        dim,
    };

    let trees = par::map_range(config.n_estimators, |t| build_tree(&data, config, t as u64));
    Ok(ForestModel {
        config: config.clone(),
        class_names: train.class_names.clone(),
        n_features: dim,
        trees,
    })
}

fn build_tree(data: &TrainingData<'_>, config: &ForestConfig, tree_index: u64) -> Tree {
    let tree_key = seed::derive(config.seed, &[STREAM_TREE, tree_index]);
    let n = data.rows.len();
    let samples: Vec<usize> = if config.bootstrap {
        let mut rng = seed::rng(seed::derive(tree_key, &[STREAM_BOOTSTRAP]));
        let mut s: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        s.sort_unstable();
        s
    } else {
        (0..n).collect()
    };
    let mut builder = TreeBuilder {
        data,
        config,
        tree_key,
        total: samples.len() as f64,
        n_candidates: config.max_features.resolve(data.dim),
        nodes: Vec::new(),
    };
    builder.grow(samples, 0);
    Tree {
        nodes: builder.nodes,
    }
}

struct TreeBuilder<'a, 'b> {
    data: &'a TrainingData<'b>,
    config: &'a ForestConfig,
    tree_key: u64,
    total: f64,
    n_candidates: usize,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy)]
struct BestSplit {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

impl TreeBuilder<'_, '_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let counts = self.histogram(&samples);
        self.nodes.push(Node::Leaf {
            counts: counts.clone(),
        });
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        if depth >= self.config.max_depth || pure || samples.len() < 2 {
            return id;
        }
        let Some(best) = self.best_split(&samples, &counts, id as u64) else {
            return id;
        };
        if best.decrease < self.config.min_impurity_decrease {
            return id;
        }
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&s| self.data.rows[s][best.feature] <= best.threshold);
        let left_id = self.grow(left, depth + 1);
        let right_id = self.grow(right, depth + 1);
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left_id,
            right: right_id,
        };
        id
    }

    fn histogram(&self, samples: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.data.n_classes];
        for &s in samples {
            counts[self.data.labels[s]] += 1.0;
        }
        counts
    }

    fn candidates(&self, node_id: u64) -> Vec<usize> {
        let dim = self.data.dim;
        if self.n_candidates >= dim {
            return (0..dim).collect();
        }
        let mut rng = seed::rng(seed::derive(self.tree_key, &[STREAM_NODE, node_id]));
        let mut picked = sample(&mut rng, dim, self.n_candidates).into_vec();
        picked.sort_unstable();
        picked
    }

    fn best_split(&self, samples: &[usize], counts: &[f64], node_id: u64) -> Option<BestSplit> {
        let n = samples.len() as f64;
        let parent_sq: f64 = counts.iter().map(|c| c * c).sum();
        let parent_gini = 1.0 - parent_sq / (n * n);
        let weight = n / self.total;
        let mut best: Option<BestSplit> = None;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        let mut left = vec![0.0; counts.len()];
        for feature in self.candidates(node_id) {
            sorted.clear();
            sorted.extend(samples.iter().map(|&s| (self.data.rows[s][feature], self.data.labels[s])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            left.iter_mut().for_each(|c| *c = 0.0);
            let mut left_sq = 0.0;
            let mut right_sq = parent_sq;
            for i in 0..sorted.len() - 1 {
                let class = sorted[i].1;
                let lc = left[class];
                let rc = counts[class] - lc;
                left_sq += 2.0 * lc + 1.0;
                right_sq -= 2.0 * rc - 1.0;
                left[class] = lc + 1.0;
                let (v, next) = (sorted[i].0, sorted[i + 1].0);
                if v == next {
                    continue;
                }
                let nl = (i + 1) as f64;
                let nr = n - nl;
                let gini_l = 1.0 - left_sq / (nl * nl);
                let gini_r = 1.0 - right_sq / (nr * nr);
                let decrease = weight * (parent_gini - (nl / n) * gini_l - (nr / n) * gini_r);
                if best.map_or(true, |b| decrease > b.decrease + SPLIT_TIE_EPS) {
                    let mid = v + (next - v) / 2.0;
                    let threshold = if mid < next { mid } else { v };
                    best = Some(BestSplit {
                        feature,
                        threshold,
                        decrease,
                    });
                }
            }
        }
        best
    }
}

impl ForestModel {
    pub fn predict(&self, features: &FeatureVector) -> Result<Prediction> {
        if features.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: features.len(),
            });
        }
        let mut probabilities = vec![0.0; self.class_names.len()];
        for tree in &self.trees {
            let counts = tree.leaf_for(&features.values);
            let total: f64 = counts.iter().sum();
            for (p, c) in probabilities.iter_mut().zip(counts) {
                *p += c / total;
            }
        }
        let n_trees = self.trees.len() as f64;
        probabilities.iter_mut().for_each(|p| *p /= n_trees);
        let mut class_index = 0;
        for (i, p) in probabilities.iter().enumerate() {
            if *p > probabilities[class_index] {
                class_index = i;
            }
        }
        Ok(Prediction {
            label: self.class_names[class_index].clone(),
            class_index,
            probabilities,
        })
    }

    pub fn predict_many(&self, features: &[FeatureVector]) -> Result<Vec<Prediction>> {
        par::try_map_slice(features, |f| self.predict(f))
    }

    /// Structural checks on a deserialized model.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.trees.is_empty() || self.class_names.is_empty() {
            return Err(Error::invalid("model has no trees or no classes"));
        }
        for (t, tree) in self.trees.iter().enumerate() {
            let n = tree.nodes.len();
            if n == 0 {
                return Err(Error::invalid(format!("tree {t} is empty")));
            }
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature,
                        left,
                        right,
                        threshold,
                    } => {
                        if *feature >= self.n_features || *left >= n || *right >= n || !threshold.is_finite() {
                            return Err(Error::invalid(format!("tree {t} has an invalid split node")));
                        }
                    }
                    Node::Leaf { counts } => {
                        if counts.len() != self.class_names.len()
                            || counts.iter().any(|c| *c < 0.0)
                            || !(counts.iter().sum::<f64>() > 0.0)
                        {
                            return Err(Error::invalid(format!("tree {t} has an invalid leaf")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<()> {
    write_json(model, path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel> {
    let model: ForestModel = read_json(path)?;
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(points: &[(&[f64], &str)]) -> Dataset<FeatureVector> {
        Dataset::from_items(
            points
                .iter()
                .map(|(v, l)| (FeatureVector::new(v.to_vec()), l.to_string()))
                .collect(),
        )
    }

    fn stump_config() -> ForestConfig {
        ForestConfig {
            n_estimators: 1,
            max_features: MaxFeatures::All,
            max_depth: 1,
            min_impurity_decrease: 0.0,
            bootstrap: false,
            seed: 0,
        }
    }

    #[test]
    fn single_class_predicts_with_certainty() {
        let data = ds(&[(&[0.1, 0.2], "a"), (&[0.4, 0.9], "a"), (&[0.3, 0.3], "a")]);
        let model = train_forest(&data, &ForestConfig { n_estimators: 7, ..Default::default() }).unwrap();
        let p = model.predict(&FeatureVector::new(vec![0.9, 0.0])).unwrap();
        assert_eq!(p.label, "a");
        assert_eq!(p.probabilities, vec![1.0]);
    }

    #[test]
    fn separable_stump() {
        let data = ds(&[(&[0.0], "A"), (&[1.0], "B")]);
        let model = train_forest(&data, &stump_config()).unwrap();
        assert_eq!(
            model.trees[0].nodes[0],
            Node::Split { feature: 0, threshold: 0.5, left: 1, right: 2 }
        );
        assert_eq!(model.predict(&FeatureVector::new(vec![0.9])).unwrap().label, "B");
        assert_eq!(model.predict(&FeatureVector::new(vec![0.0])).unwrap().label, "A");
    }

    #[test]
    fn ties_follow_class_order() {
        let data = ds(&[(&[0.0], "x"), (&[0.0], "y")]);
        let model = train_forest(&data, &stump_config()).unwrap();
        let p = model.predict(&FeatureVector::new(vec![0.0])).unwrap();
        assert_eq!(p.probabilities, vec![0.5, 0.5]);
        assert_eq!(p.label, "x");
    }

    #[test]
    fn rejects_bad_input() {
        let empty: Dataset<FeatureVector> = Dataset::from_items(vec![]);
        assert!(train_forest(&empty, &stump_config()).is_err());
        let ragged = ds(&[(&[0.0], "a"), (&[0.0, 1.0], "b")]);
        assert!(matches!(
            train_forest(&ragged, &stump_config()),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
        let data = ds(&[(&[0.0], "A"), (&[1.0], "B")]);
        let model = train_forest(&data, &stump_config()).unwrap();
        assert!(model.predict(&FeatureVector::new(vec![0.0, 0.0])).is_err());
        let bad = ForestConfig { n_estimators: 0, ..stump_config() };
        assert!(train_forest(&data, &bad).is_err());
    }

    #[test]
    fn min_impurity_decrease_blocks_weak_splits() {
        let data = ds(&[(&[0.0], "a"), (&[1.0], "a"), (&[2.0], "a"), (&[3.0], "b")]);
        let cfg = ForestConfig { min_impurity_decrease: 0.5, max_depth: 5, ..stump_config() };
        let model = train_forest(&data, &cfg).unwrap();
        assert_eq!(model.trees[0].nodes.len(), 1);
    }

    #[test]
    fn candidate_counts() {
        assert_eq!(MaxFeatures::Log2.resolve(50), 6);
        assert_eq!(MaxFeatures::Sqrt.resolve(50), 8);
        assert_eq!(MaxFeatures::All.resolve(50), 50);
        assert_eq!(MaxFeatures::Log2.resolve(1), 1);
    }

    #[test]
    fn model_json_round_trip() {
        let data = ds(&[(&[0.1, 0.7], "a"), (&[0.35, 0.2], "b"), (&[0.3, 0.33333], "a")]);
        let cfg = ForestConfig { n_estimators: 5, ..Default::default() };
        let model = train_forest(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        save_model(&model, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), model);
    }
}
