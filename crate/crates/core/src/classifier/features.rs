use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::Trace1D;

pub const DEFAULT_BIN_COUNT: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector { values, label: None }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Means over `bin_count` half-overlapping windows.
///
/// With stride `s = N / bin_count`, window `i` covers `[round(i·s), round(i·s + 2s))`
/// clipped to the trace, so consecutive windows share half their span.
pub fn extract_features(trace: &Trace1D, bin_count: usize) -> Result<FeatureVector> {
    if !trace.normalized {
        return Err(Error::invalid("features need a normalized trace"));
    }
    if bin_count == 0 {
        return Err(Error::invalid("bin_count must be at least 1"));
    }
    let n = trace.len();
    if n < bin_count {
        return Err(Error::invalid(format!(
            "trace of {n} samples is shorter than {bin_count} bins"
        )));
    }
    let stride = n as f64 / bin_count as f64;
    let values = (0..bin_count)
        .map(|i| {
            let start = (i as f64 * stride).round() as usize;
            let end = ((i as f64 * stride + 2.0 * stride).round() as usize).min(n);
            let window = &trace.values[start..end];
            window.iter().sum::<f64>() / window.len() as f64
        })
        .collect();
    Ok(FeatureVector { values, label: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: &[f64]) -> Trace1D {
        Trace1D::new_normalized(v.to_vec(), 1.0).unwrap()
    }

    #[test]
    fn hand_computed_windows() {
        assert_eq!(extract_features(&norm(&[0., 0., 1., 1.]), 2).unwrap().values, vec![0.5, 1.0]);
        assert_eq!(
            extract_features(&norm(&[0., 1., 0., 1., 0., 1.]), 3).unwrap().values,
            vec![0.5, 0.5, 0.5]
        );
    }

    #[test]
    fn constant_trace_constant_features() {
        let f = extract_features(&norm(&[0.25; 137]), 50).unwrap();
        assert_eq!(f.len(), 50);
        assert!(f.values.iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn errors() {
        assert!(extract_features(&norm(&[0.1, 0.2]), 3).is_err());
        assert!(extract_features(&norm(&[0.1, 0.2]), 0).is_err());
        let raw = Trace1D::new(vec![0.1, 0.2], 1.0).unwrap();
        assert!(extract_features(&raw, 1).is_err());
    }
}
