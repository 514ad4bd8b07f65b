//! Tree-ensemble variable importance and dual-ranking feature selection.

mod bins;
mod forest;
mod gbdt;
mod params;
mod ranking;

pub use forest::fit_forest_importance;
pub use gbdt::fit_gbdt_importance;
pub use params::TreeParams;
pub use ranking::{ranking_rows, select_common_topk, ImportanceRanking, RankingRow};

use crate::error::{Error, Result};
use crate::tabular::{class_counts, EncodedMatrix, NUM_CLASSES};

fn require_two_classes(x: &EncodedMatrix, y: &[usize]) -> Result<[usize; NUM_CLASSES]> {
    if x.n_rows() == 0 || y.len() != x.n_rows() {
        return Err(Error::Data(format!("{} labels for {} rows", y.len(), x.n_rows())));
    }
    if y.iter().any(|&l| l >= NUM_CLASSES) {
        return Err(Error::Data("label index out of range".into()));
    }
    let counts = class_counts(y.iter().copied());
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::Data("importance needs at least two classes".into()));
    }
    Ok(counts)
}
