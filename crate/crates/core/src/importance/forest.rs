use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::bins::Binned;
use super::params::TreeParams;
use super::ranking::ImportanceRanking;
use super::require_two_classes;
use crate::error::Result;
use crate::seed::rng_for;
use crate::tabular::{EncodedMatrix, NUM_CLASSES};

/// `n · gini` from class counts.
fn weighted_gini(counts: &[usize; NUM_CLASSES]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

struct Ctx<'a, R> {
    bins: &'a Binned,
    labels: &'a [usize],
    col_field: &'a [usize],
    p: &'a TreeParams,
    m: usize,
    rng: R,
    importance: Vec<f64>,
    hist: Vec<[usize; NUM_CLASSES]>,
}

impl<R: Rng> Ctx<'_, R> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) {
        let n = idx.len();
        let mut counts = [0usize; NUM_CLASSES];
        for &i in idx.iter() {
            counts[self.labels[i]] += 1;
        }
        if depth >= self.p.max_depth || n < 2 * self.p.min_samples_leaf || counts.iter().filter(|&&c| c > 0).count() < 2 {
            return;
        }
        let parent = weighted_gini(&counts);
        let cols: Vec<usize> = if self.m == self.bins.n_cols {
            (0..self.bins.n_cols).collect()
        } else {
            let mut c = index::sample(&mut self.rng, self.bins.n_cols, self.m).into_vec();
            c.sort_unstable();
            c
        };
        let mut best: Option<(f64, usize, usize)> = None;
        for &c in &cols {
            let nb = self.bins.n_bins[c];
            if nb < 2 {
                continue;
            }
            let code = self.bins.column(c);
            self.hist[..nb].fill([0; NUM_CLASSES]);
            for &i in idx.iter() {
                self.hist[code[i] as usize][self.labels[i]] += 1;
            }
            let mut left = [0usize; NUM_CLASSES];
            let mut n_left = 0;
            for b in 0..nb - 1 {
                for k in 0..NUM_CLASSES {
                    left[k] += self.hist[b][k];
                }
                n_left += self.hist[b].iter().sum::<usize>();
                if n_left < self.p.min_samples_leaf {
                    continue;
                }
                if n - n_left < self.p.min_samples_leaf {
                    break;
                }
                let right = [counts[0] - left[0], counts[1] - left[1], counts[2] - left[2]];
                let gain = parent - weighted_gini(&left) - weighted_gini(&right);
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, c, b));
                }
            }
        }
        let Some((gain, c, b)) = best else { return };
        self.importance[self.col_field[c]] += gain;
        let code = self.bins.column(c);
        let mid = partition(idx, |i| code[i] as usize <= b);
        let (l, r) = idx.split_at_mut(mid);
        self.grow(l, depth + 1);
        self.grow(r, depth + 1);
    }
}

/// Moves rows satisfying `pred` to the front, preserving relative order on both sides.
pub(crate) fn partition(idx: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| pred(i));
    let mid = l.len();
    idx[..mid].copy_from_slice(&l);
    idx[mid..].copy_from_slice(&r);
    mid
}

/// Random-forest Gini importance pooled over each field's one-hot columns.
pub fn fit_forest_importance(x: &EncodedMatrix, y: &[usize], p: &TreeParams) -> Result<ImportanceRanking> {
    p.validate()?;
    require_two_classes(x, y)?;
    let bins = Binned::new(x);
    let col_field = x.column_fields();
    let n = x.n_rows();
    let m = p.columns_per_split(x.n_cols());
    let per_tree: Vec<Vec<f64>> = (0..p.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(p.seed, "forest-tree", t as u64);
            let mut idx: Vec<usize> = if p.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut ctx = Ctx {
                bins: &bins,
                labels: y,
                col_field: &col_field,
                p,
                m,
                rng,
                importance: vec![0.0; x.schema().num_fields()],
                hist: vec![[0; NUM_CLASSES]; super::bins::MAX_BINS + 1],
            };
            ctx.grow(&mut idx, 0);
            ctx.importance
        })
        .collect();
    let mut total = vec![0.0; x.schema().num_fields()];
    for imp in &per_tree {
        for (t, v) in total.iter_mut().zip(imp) {
            *t += v;
        }
    }
    ImportanceRanking::from_raw(x.schema(), &total)
}
