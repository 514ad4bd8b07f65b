//! Per-column histogram binning shared by both tree learners.

use crate::tabular::EncodedMatrix;

pub(crate) const MAX_BINS: usize = 255;

/// Column-major bin codes. A split "at bin b" sends codes ≤ b left.
pub(crate) struct Binned {
    pub n_rows: usize,
    pub n_cols: usize,
    codes: Vec<u8>,
    pub n_bins: Vec<usize>,
}

impl Binned {
    pub fn new(x: &EncodedMatrix) -> Self {
        let (n_rows, n_cols) = (x.n_rows(), x.n_cols());
        let mut codes = vec![0u8; n_rows * n_cols];
        let mut n_bins = Vec::with_capacity(n_cols);
        let data = x.data();
        for c in 0..n_cols {
            let mut col: Vec<f64> = (0..n_rows).map(|r| data[r * n_cols + c]).collect();
            let cuts = cut_points(&mut col);
            n_bins.push(cuts.len() + 1);
            let out = &mut codes[c * n_rows..(c + 1) * n_rows];
            for (r, o) in out.iter_mut().enumerate() {
                let v = data[r * n_cols + c];
                *o = cuts.partition_point(|&t| t < v) as u8;
            }
        }
        Self {
            n_rows,
            n_cols,
            codes,
            n_bins,
        }
    }

    pub fn column(&self, c: usize) -> &[u8] {
        &self.codes[c * self.n_rows..(c + 1) * self.n_rows]
    }
}

/// Upper edges separating bins: every distinct value but the largest when
/// there are few of them, otherwise evenly spaced order statistics.
fn cut_points(col: &mut [f64]) -> Vec<f64> {
    col.sort_by(f64::total_cmp);
    let mut uniq: Vec<f64> = Vec::new();
    for &v in col.iter() {
        if uniq.last() != Some(&v) {
            uniq.push(v);
        }
    }
    if uniq.len() <= MAX_BINS {
        uniq.pop();
        return uniq;
    }
    let n = col.len();
    let mut cuts: Vec<f64> = Vec::with_capacity(MAX_BINS - 1);
    for j in 1..MAX_BINS {
        let v = col[(j * n / MAX_BINS).min(n - 1)];
        if cuts.last() != Some(&v) && v < col[n - 1] {
            cuts.push(v);
        }
    }
    cuts
}
