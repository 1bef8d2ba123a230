//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use magspy::classifier::{train_forest, FeatureVector, ForestConfig, MaxFeatures, Node};
use magspy::trace::Dataset;
use magspy::Vec3;
use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Unit, Vector3};
use rand::Rng;

/// Principal eigenvector and eigenvalue of the sample covariance, using a
/// dense solver.
pub fn pca_oracle(mag: &[Vec3]) -> (Vector3<f64>, f64) {
    let n = mag.len() as f64;
    let mean = mag.iter().fold(Vector3::zeros(), |acc, s| acc + Vector3::from(*s)) / n;
    let cov = mag.iter().fold(Matrix3::zeros(), |acc, s| {
        let d = Vector3::from(*s) - mean;
        acc + d * d.transpose()
    }) / (n - 1.0);
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imax();
    (eig.eigenvectors.column(i).into_owned(), eig.eigenvalues[i])
}

/// Anisotropic Gaussian cloud in a random orientation with a clear gap
/// between the two largest variances.
pub fn random_cloud(rng: &mut impl Rng, len: usize) -> Vec<Vec3> {
    let s1 = rng.random_range(2.0..10.0);
    let s2 = s1 * rng.random_range(0.1..0.6);
    let s3 = s2 * rng.random_range(0.1..1.0);
    let axis = Unit::new_normalize(Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0) + 1e-3,
    ));
    let rot = Rotation3::from_axis_angle(&axis, rng.random_range(0.0..std::f64::consts::TAU));
    let offset = Vector3::new(rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    (0..len)
        .map(|_| {
            let z: [f64; 3] = std::array::from_fn(|_| rng.sample::<f64, _>(rand_distr::StandardNormal));
            let v = rot * Vector3::new(s1 * z[0], s2 * z[1], s3 * z[2]) + offset;
            [v.x, v.y, v.z]
        })
        .collect()
}

pub fn sample_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|&c| (c as f64 / n as f64).powi(2)).sum::<f64>()
}

/// Exhaustive best Gini split over every feature and every midpoint between
/// consecutive distinct values; ties go to the lowest feature, then the
/// lowest threshold. `None` when the node is pure or no split exists.
pub fn brute_force_split(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Option<(usize, f64)> {
    let mut all = vec![0; n_classes];
    labels.iter().for_each(|&l| all[l] += 1);
    if all.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let n = rows.len() as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let mut values: Vec<f64> = rows.iter().map(|r| r[f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let t = if mid < w[1] { mid } else { w[0] };
            let mut left = vec![0; n_classes];
            let mut right = vec![0; n_classes];
            for (r, &l) in rows.iter().zip(labels) {
                if r[f] <= t {
                    left[l] += 1
                } else {
                    right[l] += 1
                }
            }
            let nl: usize = left.iter().sum();
            let child = (nl as f64 / n) * gini(&left) + ((rows.len() - nl) as f64 / n) * gini(&right);
            let decrease = gini(&all) - child;
            if best.map_or(true, |(d, _, _)| decrease > d + 1e-12) {
                best = Some((decrease, f, t));
            }
        }
    }
    best.map(|(_, f, t)| (f, t))
}

/// Small dataset on a coarse grid so that equal values and tied splits are common.
pub fn random_split_dataset(rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let n = rng.random_range(2..=8);
    let d = rng.random_range(2..=4);
    let classes = rng.random_range(2..=3);
    let rows = (0..n).map(|_| (0..d).map(|_| rng.random_range(0..5) as f64 * 0.25).collect()).collect();
    let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
    (rows, labels)
}

pub fn stump_config() -> ForestConfig {
    ForestConfig {
        n_estimators: 1,
        max_features: MaxFeatures::All,
        max_depth: 1,
        min_impurity_decrease: 0.0,
        bootstrap: false,
        seed: 0,
    }
}

/// Root split chosen by a single depth-1 tree.
pub fn learned_split(rows: &[Vec<f64>], labels: &[usize]) -> Option<(usize, f64)> {
    let n_classes = labels.iter().max().unwrap() + 1;
    let names: Vec<String> = (0..n_classes).map(|c| format!("c{c}")).collect();
    let items = rows.iter().zip(labels).map(|(r, &l)| (FeatureVector::new(r.clone()), names[l].clone())).collect();
    let data = Dataset::with_classes(items, names).unwrap();
    let model = train_forest(&data, &stump_config()).unwrap();
    match &model.trees[0].nodes[0] {
        Node::Split { feature, threshold, .. } => Some((*feature, *threshold)),
        Node::Leaf { .. } => None,
    }
}
