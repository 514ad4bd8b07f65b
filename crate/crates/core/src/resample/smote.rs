use std::ops::Range;

use rand::Rng;

use super::knn::knn_batch;
use super::params::{ResampleParams, Target};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tabular::{EncodedMatrix, NUM_CLASSES};

/// Where a synthetic row came from (indices into the input matrix).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Synthetic {
    pub seed_row: usize,
    pub neighbour: usize,
    pub lambda: f64,
}

pub(crate) fn targets(counts: &[usize; NUM_CLASSES], target: Target) -> [usize; NUM_CLASSES] {
    match target {
        // absent classes stay absent: there is nothing to interpolate from
        Target::MatchMajority => {
            let top = *counts.iter().max().unwrap_or(&0);
            counts.map(|c| if c > 0 { top } else { 0 })
        }
        Target::Counts(t) => t,
    }
}

fn argmax_block(block: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in block.iter().enumerate() {
        if v > block[best] {
            best = j;
        }
    }
    best
}

/// Snaps each field block to the one-hot of its max entry; ties prefer `prefer[f]`.
fn snap(row: &mut [f64], blocks: &[Range<usize>], prefer: &[usize]) {
    for (r, &pref) in blocks.iter().zip(prefer) {
        let block = &mut row[r.clone()];
        let mx = block.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pick = if block[pref] == mx { pref } else { argmax_block(block) };
        block.fill(0.0);
        block[pick] = 1.0;
    }
}

/// Interpolates new rows for every class below its target. Originals come
/// first, then synthetic rows grouped by class.
pub fn smote_with_provenance(x: &EncodedMatrix, p: &ResampleParams) -> Result<(EncodedMatrix, Vec<Synthetic>)> {
    p.validate()?;
    let counts = x.class_counts();
    let goal = targets(&counts, p.target);
    let n_cols = x.n_cols();
    let mut data = x.data().to_vec();
    let mut labels = x.labels().to_vec();
    let mut prov = Vec::new();
    let blocks = x.column_map().to_vec();

    for c in 0..NUM_CLASSES {
        let need = goal[c].saturating_sub(counts[c]);
        if need == 0 {
            continue;
        }
        if counts[c] <= p.smote_k {
            return Err(Error::Data(format!(
                "class {} has {} rows; SMOTE with k = {} needs more",
                x.schema().label_levels()[c],
                counts[c],
                p.smote_k
            )));
        }
        let members: Vec<usize> = (0..x.n_rows()).filter(|&i| x.labels()[i] == c).collect();
        let neigh = knn_batch(x.data(), n_cols, &members, &members, p.smote_k);
        let mut rng = rng_for(p.seed, "smote", c as u64);
        let mut row = vec![0.0; n_cols];
        for _ in 0..need {
            let m = rng.random_range(0..members.len());
            let seed_row = members[m];
            let neighbour = neigh[m][rng.random_range(0..p.smote_k)];
            let lambda: f64 = rng.random();
            let (a, b) = (x.row(seed_row), x.row(neighbour));
            for j in 0..n_cols {
                row[j] = a[j] + lambda * (b[j] - a[j]);
            }
            if p.snap_categorical {
                let prefer: Vec<usize> = blocks.iter().map(|r| argmax_block(&a[r.clone()])).collect();
                snap(&mut row, &blocks, &prefer);
            }
            data.extend_from_slice(&row);
            labels.push(c);
            prov.push(Synthetic { seed_row, neighbour, lambda });
        }
    }
    Ok((EncodedMatrix::from_parts(x.schema().clone(), data, labels)?, prov))
}

pub fn smote(x: &EncodedMatrix, p: &ResampleParams) -> Result<EncodedMatrix> {
    smote_with_provenance(x, p).map(|(m, _)| m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_prefers_seed_level_on_tie() {
        let mut row = vec![0.5, 0.5, 0.0];
        snap(&mut row, &[0..3], &[1]);
        assert_eq!(row, vec![0.0, 1.0, 0.0]);
        let mut row = vec![0.2, 0.3, 0.5];
        snap(&mut row, &[0..3], &[0]);
        assert_eq!(row, vec![0.0, 0.0, 1.0]);
    }
}
