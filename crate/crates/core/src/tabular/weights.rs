use crate::error::{Error, Result};

/// Balanced class weights `n / (k · n_c)`.
pub fn class_weights(labels: &[usize], k: usize) -> Result<Vec<f64>> {
    let mut counts = vec![0usize; k];
    for &l in labels {
        if l >= k {
            return Err(Error::Data(format!("label {l} outside 0..{k}")));
        }
        counts[l] += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Data(format!("class {c} is absent; cannot weight it")));
    }
    let n = labels.len() as f64;
    Ok(counts.iter().map(|&nc| n / (k as f64 * nc as f64)).collect())
}
