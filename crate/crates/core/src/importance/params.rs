use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeParams {
    /// Trees for the forest, boosting rounds for the GBDT.
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of encoded columns considered at each split.
    pub feature_subsample: f64,
    pub learning_rate: f64,
    pub seed: u64,
    /// Forest only: draw each tree's rows with replacement.
    #[serde(default = "default_true")]
    pub bootstrap: bool,
}

fn default_true() -> bool {
    true
}

impl TreeParams {
    pub fn forest_default() -> Self {
        Self {
            n_trees: 200,
            max_depth: 8,
            min_samples_leaf: 5,
            feature_subsample: 0.3,
            learning_rate: 0.1,
            seed: 0,
            bootstrap: true,
        }
    }

    pub fn gbdt_default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 3,
            min_samples_leaf: 5,
            feature_subsample: 1.0,
            learning_rate: 0.1,
            seed: 0,
            bootstrap: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Param("n_trees must be positive (zero boosting rounds is not a model)".into()));
        }
        if self.max_depth == 0 || self.min_samples_leaf == 0 {
            return Err(Error::Param("max_depth and min_samples_leaf must be positive".into()));
        }
        if !(self.feature_subsample > 0.0 && self.feature_subsample <= 1.0) {
            return Err(Error::Param(format!("feature_subsample {} not in (0, 1]", self.feature_subsample)));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Param("learning_rate must be positive".into()));
        }
        Ok(())
    }

    pub(crate) fn columns_per_split(&self, n_cols: usize) -> usize {
        ((self.feature_subsample * n_cols as f64).round() as usize).clamp(1, n_cols)
    }
}
