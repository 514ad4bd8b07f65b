//! Exact brute-force Euclidean k-NN. Distance ties go to the lower row index.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tabular::EncodedMatrix;

const CHUNK: usize = 8;

/// Squared distance, or `None` once the running sum reaches `bound`.
#[inline]
fn dist2_bounded(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    let mut s = 0.0;
    for (ca, cb) in a.chunks(CHUNK).zip(b.chunks(CHUNK)) {
        for (x, y) in ca.iter().zip(cb) {
            let d = x - y;
            s += d * d;
        }
        if s >= bound {
            return None;
        }
    }
    Some(s)
}

/// The `k` rows of `data` (row-major, `n_cols` wide) nearest to `query`, scanning
/// `candidates` (ascending) and skipping `skip`.
pub(crate) fn nearest(data: &[f64], n_cols: usize, query: &[f64], candidates: &[usize], skip: Option<usize>, k: usize) -> Vec<usize> {
    let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
    for &j in candidates {
        if Some(j) == skip {
            continue;
        }
        let bound = if best.len() == k { best[k - 1].0 } else { f64::INFINITY };
        let Some(d) = dist2_bounded(query, &data[j * n_cols..(j + 1) * n_cols], bound) else {
            continue;
        };
        // candidates arrive in ascending index order, so equal distances stay behind
        let pos = best.partition_point(|&(bd, _)| bd <= d);
        best.insert(pos, (d, j));
        best.truncate(k);
    }
    best.into_iter().map(|(_, j)| j).collect()
}

/// Neighbours of each row in `queries` among `candidates` (query itself excluded).
pub(crate) fn knn_batch(data: &[f64], n_cols: usize, candidates: &[usize], queries: &[usize], k: usize) -> Vec<Vec<usize>> {
    queries
        .par_iter()
        .map(|&q| nearest(data, n_cols, &data[q * n_cols..(q + 1) * n_cols], candidates, Some(q), k))
        .collect()
}

/// `k` nearest rows to `query` (excluding it), optionally only among rows of `class`.
pub fn knn_indices(x: &EncodedMatrix, query: usize, k: usize, class: Option<usize>) -> Result<Vec<usize>> {
    if query >= x.n_rows() {
        return Err(Error::Param(format!("query row {query} out of range")));
    }
    let candidates: Vec<usize> = (0..x.n_rows())
        .filter(|&i| class.is_none_or(|c| x.labels()[i] == c))
        .collect();
    let eligible = candidates.iter().filter(|&&i| i != query).count();
    if k == 0 || k > eligible {
        return Err(Error::Param(format!("k = {k} but only {eligible} eligible rows")));
    }
    Ok(nearest(x.data(), x.n_cols(), x.row(query), &candidates, Some(query), k))
}
