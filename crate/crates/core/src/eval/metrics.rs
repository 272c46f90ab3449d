//! Confusion matrices and unweighted average scores.
//!
//! Per class: recall `tp / (tp + fn)`, precision `tp / (tp + fp)`,
//! F-score `2PR / (P + R)`. Unweighted averages run over the classes that
//! have at least one truth frame; a class that is never predicted has
//! precision 0.

use serde::{Deserialize, Serialize};

use crate::data::ClassSet;
use crate::error::{Error, Result};

/// Rows are truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: ClassSet,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: ClassSet) -> Self {
        let c = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn from_labels(pred: &[usize], truth: &[usize], classes: &ClassSet) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                got: pred.len(),
            });
        }
        let mut cm = Self::new(classes.clone());
        for (&p, &t) in pred.iter().zip(truth) {
            cm.add(t, p)?;
        }
        Ok(cm)
    }

    pub fn add(&mut self, truth: usize, pred: usize) -> Result<()> {
        let c = self.classes.len();
        if truth >= c || pred >= c {
            return Err(Error::UnknownLabel(format!("class index {} of {c}", truth.max(pred))));
        }
        self.counts[truth][pred] += 1;
        Ok(())
    }

    /// Adds another matrix's counts (pooling over folds).
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::invalid("merging confusion matrices of different class sets"));
        }
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (a, b) in row.iter_mut().zip(orow) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn truth_count(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        self.counts.iter().map(|r| r[class]).sum()
    }
}

/// Convenience wrapper for [`ConfusionMatrix::from_labels`].
pub fn confusion(pred: &[usize], truth: &[usize], classes: &ClassSet) -> Result<ConfusionMatrix> {
    ConfusionMatrix::from_labels(pred, truth, classes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: String,
    pub support: u64,
    /// `None` when the class has no truth frames.
    pub recall: Option<f64>,
    pub precision: f64,
    pub f_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub acc: f64,
    pub uar: f64,
    pub uap: f64,
    pub uaf: f64,
    pub frames: u64,
    pub per_class: Vec<ClassScore>,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Self {
        summary_metrics(cm)
    }
}

pub fn summary_metrics(cm: &ConfusionMatrix) -> Metrics {
    let c = cm.classes.len();
    let total = cm.total();
    let correct: u64 = (0..c).map(|i| cm.counts[i][i]).sum();
    let mut per_class = Vec::with_capacity(c);
    for i in 0..c {
        let tp = cm.counts[i][i] as f64;
        let support = cm.truth_count(i);
        let predicted = cm.predicted_count(i);
        let recall = (support > 0).then(|| tp / support as f64);
        let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
        let r = recall.unwrap_or(0.0);
        let f_score = if precision + r > 0.0 {
            2.0 * precision * r / (precision + r)
        } else {
            0.0
        };
        per_class.push(ClassScore {
            class: cm.classes.name(i).to_string(),
            support,
            recall,
            precision,
            f_score,
        });
    }
    let present: Vec<&ClassScore> = per_class.iter().filter(|s| s.recall.is_some()).collect();
    let mean = |f: &dyn Fn(&ClassScore) -> f64| {
        if present.is_empty() {
            0.0
        } else {
            present.iter().map(|s| f(s)).sum::<f64>() / present.len() as f64
        }
    };
    Metrics {
        acc: if total > 0 { correct as f64 / total as f64 } else { 0.0 },
        uar: mean(&|s| s.recall.unwrap_or(0.0)),
        uap: mean(&|s| s.precision),
        uaf: mean(&|s| s.f_score),
        frames: total,
        per_class,
    }
}
