use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::NUM_CLASSES;

/// Rows are true classes, columns predicted, order KA, BC, O.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[usize; NUM_CLASSES]; NUM_CLASSES]);

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.0.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..NUM_CLASSES).map(|c| self.0[c][c]).sum()
    }

    pub fn row_sum(&self, c: usize) -> usize {
        self.0[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> usize {
        self.0.iter().map(|r| r[c]).sum()
    }
}

pub fn confusion_matrix(y_true: &[usize], y_pred: &[usize]) -> Result<ConfusionMatrix> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Data(format!("{} true labels vs {} predictions", y_true.len(), y_pred.len())));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= NUM_CLASSES || p >= NUM_CLASSES {
            return Err(Error::Data(format!("label pair ({t}, {p}) out of range")));
        }
        cm.0[t][p] += 1;
    }
    Ok(cm)
}

/// All values in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Per-class accuracy, reported as recall.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub per_class_accuracy_is_recall: bool,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix, labels: &[String]) -> Result<Metrics> {
    if cm.total() == 0 {
        return Err(Error::Data("empty confusion matrix".into()));
    }
    let per_class = (0..NUM_CLASSES)
        .map(|c| {
            let p = ratio(cm.0[c][c], cm.col_sum(c));
            let r = ratio(cm.0[c][c], cm.row_sum(c));
            let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            ClassMetrics {
                class: labels.get(c).cloned().unwrap_or_else(|| c.to_string()),
                precision: 100.0 * p,
                recall: 100.0 * r,
                f1: 100.0 * f1,
                accuracy: 100.0 * r,
            }
        })
        .collect();
    Ok(Metrics {
        per_class,
        accuracy: 100.0 * ratio(cm.trace(), cm.total()),
        per_class_accuracy_is_recall: true,
    })
}
