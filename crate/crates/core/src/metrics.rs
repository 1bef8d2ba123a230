//! Confusion accounting and precision / recall / F1.
//!
//! Ratios with a zero denominator are reported as `None` and left out of
//! macro averages instead of being counted as zero.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tn: Option<u64>,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, fp, fn_, tn: None }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = ConfusionCounts;

    fn add(self, o: ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: match (self.tn, o.tn) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// precision = TP/(TP+FP), recall = TP/(TP+FN), f1 = harmonic mean.
pub fn precision_recall_f1(c: &ConfusionCounts) -> Scores {
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Scores { precision, recall, f1 }
}

/// Square confusion matrix; rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.matrix.len()).map(|i| self.matrix[i][i]).sum()
    }

    pub fn counts(&self, class: usize) -> ConfusionCounts {
        let tp = self.matrix[class][class];
        let row: u64 = self.matrix[class].iter().sum();
        let col: u64 = self.matrix.iter().map(|r| r[class]).sum();
        ConfusionCounts {
            tp,
            fp: col - tp,
            fn_: row - tp,
            tn: Some(self.total() + tp - row - col),
        }
    }
}

/// Tallies `(true, predicted)` pairs.
pub fn confusion<'a, I>(pairs: I, class_names: &[String]) -> Result<ConfusionMatrix>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    let k = class_names.len();
    let mut matrix = vec![vec![0u64; k]; k];
    let index = |l: &str| {
        class_names
            .iter()
            .position(|c| c == l)
            .ok_or_else(|| Error::UnknownLabel(l.to_string()))
    };
    for (truth, pred) in pairs {
        matrix[index(truth)?][index(pred)?] += 1;
    }
    Ok(ConfusionMatrix { class_names: class_names.to_vec(), matrix })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub support: u64,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub n: u64,
    pub per_class: Vec<ClassReport>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
    pub confusion: ConfusionMatrix,
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64)
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        let per_class: Vec<ClassReport> = (0..confusion.class_names.len())
            .map(|i| {
                let counts = confusion.counts(i);
                ClassReport {
                    label: confusion.class_names[i].clone(),
                    support: counts.tp + counts.fn_,
                    counts,
                    scores: precision_recall_f1(&counts),
                }
            })
            .collect();
        Self::assemble(confusion, per_class)
    }

    /// Report limited to `labels` (e.g. the monitored classes); accuracy still
    /// covers every prediction in the matrix.
    pub fn restricted_to(&self, labels: &[String]) -> EvalReport {
        let per_class = self
            .per_class
            .iter()
            .filter(|c| labels.contains(&c.label))
            .cloned()
            .collect();
        Self::assemble(self.confusion.clone(), per_class)
    }

    fn assemble(confusion: ConfusionMatrix, per_class: Vec<ClassReport>) -> Self {
        let total = confusion.total();
        let accuracy = if total > 0 { confusion.correct() as f64 / total as f64 } else { 0.0 };
        EvalReport {
            accuracy,
            n: total,
            macro_precision: mean_defined(per_class.iter().map(|c| c.scores.precision)),
            macro_recall: mean_defined(per_class.iter().map(|c| c.scores.recall)),
            macro_f1: mean_defined(per_class.iter().map(|c| c.scores.f1)),
            per_class,
            confusion,
        }
    }

    /// Micro-averaged counts over the listed classes.
    pub fn pooled_counts(&self) -> ConfusionCounts {
        self.per_class
            .iter()
            .map(|c| ConfusionCounts { tn: None, ..c.counts })
            .fold(ConfusionCounts::default(), |a, b| a + b)
    }

    /// Aligned plain-text table: class, precision, recall, F1 (percent).
    pub fn to_text(&self) -> String {
        let width = self
            .per_class
            .iter()
            .map(|c| c.label.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let pct = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{:.1}", 100.0 * x));
        let mut out = String::new();
        let _ = writeln!(out, "accuracy: {:.1}% ({} samples)", 100.0 * self.accuracy, self.n);
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>8}  {:>10}  {:>7}",
            "class", "Precision,%", "Recall,%", "F1 score,%", "support"
        );
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{:<width$}  {:>11}  {:>8}  {:>10}  {:>7}",
                c.label,
                pct(c.scores.precision),
                pct(c.scores.recall),
                pct(c.scores.f1),
                c.support
            );
        }
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>8}  {:>10}",
            "macro",
            pct(self.macro_precision),
            pct(self.macro_recall),
            pct(self.macro_f1)
        );
        out
    }
}
