use super::knn::knn_batch;
use super::params::ResampleParams;
use crate::error::{Error, Result};
use crate::tabular::{EncodedMatrix, NUM_CLASSES};

/// Wilson editing: keep row i when its own label has at least as many votes as
/// any other label among its `enn_k` nearest neighbours.
pub fn enn(x: &EncodedMatrix, p: &ResampleParams) -> Result<Vec<bool>> {
    p.validate()?;
    if x.n_rows() <= p.enn_k {
        return Err(Error::Data(format!(
            "ENN with k = {} needs more than {} rows",
            p.enn_k,
            x.n_rows()
        )));
    }
    let all: Vec<usize> = (0..x.n_rows()).collect();
    let neigh = knn_batch(x.data(), x.n_cols(), &all, &all, p.enn_k);
    let y = x.labels();
    Ok(neigh
        .iter()
        .enumerate()
        .map(|(i, nb)| {
            let mut votes = [0usize; NUM_CLASSES];
            for &j in nb {
                votes[y[j]] += 1;
            }
            votes.iter().all(|&v| v <= votes[y[i]])
        })
        .collect())
}
