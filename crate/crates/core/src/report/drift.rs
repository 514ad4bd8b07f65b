use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{EncodedMatrix, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDrift {
    pub field: String,
    /// TV distance per class (0 when the class is missing on both sides).
    pub per_class: [f64; NUM_CLASSES],
    pub overall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub fields: Vec<FieldDrift>,
}

impl DriftReport {
    pub fn max_per_class(&self) -> f64 {
        self.fields.iter().flat_map(|f| f.per_class).fold(0.0, f64::max)
    }
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Level-distribution shift of every field between two encodings of the same schema.
pub fn drift_diagnostics(before: &EncodedMatrix, after: &EncodedMatrix) -> Result<DriftReport> {
    if before.schema() != after.schema() {
        return Err(Error::SchemaMismatch("drift inputs use different schemas".into()));
    }
    let (cb, ca) = (before.class_counts(), after.class_counts());
    let fields = before
        .schema()
        .fields()
        .iter()
        .enumerate()
        .map(|(f, field)| {
            let mut per_class = [0.0; NUM_CLASSES];
            for (c, d) in per_class.iter_mut().enumerate() {
                *d = match (cb[c] > 0, ca[c] > 0) {
                    (true, true) => total_variation(
                        &before.level_distribution(f, Some(c)),
                        &after.level_distribution(f, Some(c)),
                    ),
                    (false, false) => 0.0,
                    // a class appearing or vanishing is a full shift
                    _ => 1.0,
                };
            }
            FieldDrift {
                field: field.name.clone(),
                per_class,
                overall: total_variation(&before.level_distribution(f, None), &after.level_distribution(f, None)),
            }
        })
        .collect();
    Ok(DriftReport { fields })
}
