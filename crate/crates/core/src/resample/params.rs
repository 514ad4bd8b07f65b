use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::NUM_CLASSES;

/// SMOTE target sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TargetRepr", into = "TargetRepr")]
pub enum Target {
    /// Grow every class to the largest class count.
    MatchMajority,
    Counts([usize; NUM_CLASSES]),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TargetRepr {
    Name(String),
    Counts([usize; NUM_CLASSES]),
}

impl TryFrom<TargetRepr> for Target {
    type Error = String;
    fn try_from(r: TargetRepr) -> std::result::Result<Self, String> {
        match r {
            TargetRepr::Name(s) if s == "match-majority" => Ok(Target::MatchMajority),
            TargetRepr::Name(s) => Err(format!("unknown resample target {s:?}")),
            TargetRepr::Counts(c) => Ok(Target::Counts(c)),
        }
    }
}

impl From<Target> for TargetRepr {
    fn from(t: Target) -> Self {
        match t {
            Target::MatchMajority => TargetRepr::Name("match-majority".into()),
            Target::Counts(c) => TargetRepr::Counts(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleParams {
    pub smote_k: usize,
    pub enn_k: usize,
    pub target: Target,
    pub seed: u64,
    pub snap_categorical: bool,
}

impl Default for ResampleParams {
    fn default() -> Self {
        Self {
            smote_k: 5,
            enn_k: 3,
            target: Target::MatchMajority,
            seed: 0,
            snap_categorical: true,
        }
    }
}

impl ResampleParams {
    pub fn validate(&self) -> Result<()> {
        if self.smote_k == 0 {
            return Err(Error::Param("smote_k must be at least 1".into()));
        }
        if self.enn_k == 0 || self.enn_k % 2 == 0 {
            return Err(Error::Param(format!("enn_k must be odd and positive, got {}", self.enn_k)));
        }
        Ok(())
    }
}
