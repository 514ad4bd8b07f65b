//! SMOTE oversampling, ENN cleaning and their composition.

mod enn;
mod knn;
mod params;
mod smote;

pub use enn::enn;
pub use knn::knn_indices;
pub use params::{ResampleParams, Target};
pub use smote::{smote, smote_with_provenance, Synthetic};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{EncodedMatrix, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: String,
    pub before: usize,
    pub after_smote: usize,
    pub after_enn: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResampleStats(pub Vec<ClassStats>);

impl ResampleStats {
    pub fn after_enn(&self) -> Vec<usize> {
        self.0.iter().map(|c| c.after_enn).collect()
    }
}

/// `enn(smote(x))` with per-class counts at each stage.
pub fn smoteenn(x: &EncodedMatrix, p: &ResampleParams) -> Result<(EncodedMatrix, ResampleStats)> {
    let before = x.class_counts();
    let s = smote(x, p)?;
    let mid = s.class_counts();
    let keep = enn(&s, p)?;
    let idx: Vec<usize> = (0..s.n_rows()).filter(|&i| keep[i]).collect();
    let out = s.select_rows(&idx);
    let after = out.class_counts();
    if idx.is_empty() {
        return Err(Error::Data("ENN removed every row".into()));
    }
    let stats = (0..NUM_CLASSES)
        .map(|c| ClassStats {
            class: x.schema().label_levels()[c].clone(),
            before: before[c],
            after_smote: mid[c],
            after_enn: after[c],
        })
        .collect();
    Ok((out, ResampleStats(stats)))
}
