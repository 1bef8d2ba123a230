//! Reduction of 3-axis magnetometer captures to normalized 1-D traces.
//!
//! The chain is PCA (first principal component) → optional block-average
//! resampling → range normalization. Training sets additionally receive the
//! inverse of every trace, since the sign of the projected disturbance is not
//! observable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{SensorRecording, Trace1D, Vec3};

/// First principal component of a 3-axis capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Unit vector; its largest-magnitude entry is non-negative.
    pub component: Vec3,
    /// Mean-centered projection onto `component` (not normalized).
    pub projected: Trace1D,
    /// Share of total variance carried by the component.
    pub explained_fraction: f64,
    /// Covariance eigenvalues in descending order.
    pub eigenvalues: [f64; 3],
}

/// Sample mean and covariance (n − 1 denominator) of 3-axis data.
pub fn covariance(samples: &[Vec3]) -> (Vec3, [[f64; 3]; 3]) {
    let n = samples.len() as f64;
    let mut mean = [0.0; 3];
    for s in samples {
        for k in 0..3 {
            mean[k] += s[k];
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut cov = [[0.0; 3]; 3];
    for s in samples {
        let d = [s[0] - mean[0], s[1] - mean[1], s[2] - mean[2]];
        for a in 0..3 {
            for b in a..3 {
                cov[a][b] += d[a] * d[b];
            }
        }
    }
    let denom = (n - 1.0).max(1.0);
    for a in 0..3 {
        for b in a..3 {
            cov[a][b] /= denom;
            cov[b][a] = cov[a][b];
        }
    }
    (mean, cov)
}

/// Cyclic Jacobi eigendecomposition of a symmetric 3×3 matrix.
///
/// Returns eigenvalues in descending order with matching unit eigenvectors.
pub fn symmetric_eigen3(m: [[f64; 3]; 3]) -> ([f64; 3], [Vec3; 3]) {
    let mut a = m;
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
    if scale > 0.0 {
        for _sweep in 0..64 {
            let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
            if off.sqrt() <= 1e-17 * scale {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // A ← Jᵀ A J for the rotation in the (p, q) plane.
                for k in 0..3 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..3 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in &mut v {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.map(|i| a[i][i]);
    let vectors = order.map(|i| [v[0][i], v[1][i], v[2][i]]);
    (values, vectors)
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is non-negative.
pub fn canonical_sign(v: Vec3) -> Vec3 {
    let mut idx = 0;
    for k in 1..3 {
        if v[k].abs() > v[idx].abs() {
            idx = k;
        }
    }
    if v[idx] < 0.0 {
        v.map(|x| -x)
    } else {
        v
    }
}

/// Projects `mag` onto its direction of highest variance.
pub fn pca_first_component(mag: &[Vec3], rate_hz: f64) -> Result<PcaResult> {
    if mag.len() < 2 {
        return Err(Error::invalid("PCA needs at least 2 samples"));
    }
    if mag.iter().all(|s| s == &mag[0]) {
        return Err(Error::DegenerateTrace);
    }
    let (mean, cov) = covariance(mag);
    let (values, vectors) = symmetric_eigen3(cov);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateTrace);
    }
    let c = vectors[0];
    let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
    let component = canonical_sign(c.map(|x| x / norm));
    let projected: Vec<f64> = mag
        .iter()
        .map(|s| {
            (s[0] - mean[0]) * component[0]
                + (s[1] - mean[1]) * component[1]
                + (s[2] - mean[2]) * component[2]
        })
        .collect();
    Ok(PcaResult {
        component,
        projected: Trace1D::new(projected, rate_hz)?,
        explained_fraction: (values[0].max(0.0) / total).clamp(0.0, 1.0),
        eigenvalues: values,
    })
}

/// Affine map of the trace onto `[0, 1]`.
pub fn normalize_unit_range(trace: &Trace1D) -> Result<Trace1D> {
    let (min, max) = trace
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(max > min) {
        return Err(Error::ConstantTrace);
    }
    let span = max - min;
    let values = trace
        .values
        .iter()
        .map(|&v| ((v - min) / span).clamp(0.0, 1.0))
        .collect();
    Ok(Trace1D {
        values,
        rate_hz: trace.rate_hz,
        normalized: true,
    })
}

/// Returns the trace together with its reflection about the normalized midline.
pub fn augment_with_inverse(trace: &Trace1D) -> Result<(Trace1D, Trace1D)> {
    if !trace.normalized {
        return Err(Error::invalid("inverse augmentation needs a normalized trace"));
    }
    let inverse = Trace1D {
        values: trace.values.iter().map(|v| 1.0 - v).collect(),
        rate_hz: trace.rate_hz,
        normalized: true,
    };
    Ok((trace.clone(), inverse))
}

/// Decimates by block averaging to `target_rate_hz`.
///
/// Output sample `j` is the mean of input indices `[round(j·r), round((j+1)·r))`
/// with `r = rate_hz / target_rate_hz`.
pub fn resample(trace: &Trace1D, target_rate_hz: f64) -> Result<Trace1D> {
    if !(target_rate_hz.is_finite() && target_rate_hz > 0.0) {
        return Err(Error::invalid(format!("target rate must be positive, got {target_rate_hz}")));
    }
    if target_rate_hz > trace.rate_hz {
        return Err(Error::invalid(format!(
            "cannot upsample from {} Hz to {target_rate_hz} Hz",
            trace.rate_hz
        )));
    }
    if target_rate_hz == trace.rate_hz {
        return Ok(Trace1D {
            values: trace.values.clone(),
            rate_hz: trace.rate_hz,
            normalized: false,
        });
    }
    let n = trace.len();
    let r = trace.rate_hz / target_rate_hz;
    let n_out = ((n as f64 / r).round() as usize).max(1);
    let values = (0..n_out)
        .map(|j| {
            let start = ((j as f64 * r).round() as usize).min(n - 1);
            let end = (((j + 1) as f64 * r).round() as usize).clamp(start + 1, n);
            trace.values[start..end].iter().sum::<f64>() / (end - start) as f64
        })
        .collect();
    Trace1D::new(values, target_rate_hz)
}

/// PCA → optional resample → normalize.
pub fn preprocess_recording(rec: &SensorRecording, target_rate_hz: Option<f64>) -> Result<Trace1D> {
    let pca = pca_first_component(&rec.mag, rec.rate_hz)?;
    let reduced = match target_rate_hz {
        Some(rate) => resample(&pca.projected, rate)?,
        None => pca.projected,
    };
    normalize_unit_range(&reduced)
}
