use rand::seq::index;

use super::bins::{Binned, MAX_BINS};
use super::forest::partition;
use super::params::TreeParams;
use super::ranking::ImportanceRanking;
use super::require_two_classes;
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tabular::{EncodedMatrix, NUM_CLASSES};

const LAMBDA: f64 = 1.0;

fn score(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

#[derive(Clone, Copy, Default)]
struct Bin {
    g: f64,
    h: f64,
    n: usize,
}

struct Tree<'a> {
    bins: &'a Binned,
    grad: &'a [f64],
    hess: &'a [f64],
    cols: &'a [usize],
    col_field: &'a [usize],
    p: &'a TreeParams,
    importance: &'a mut [f64],
    hist: Vec<Bin>,
    /// (rows, leaf weight) for every finished leaf
    leaves: Vec<(Vec<usize>, f64)>,
}

impl Tree<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize) {
        let (mut g, mut h) = (0.0, 0.0);
        for &i in idx.iter() {
            g += self.grad[i];
            h += self.hess[i];
        }
        let n = idx.len();
        let leaf = -g / (h + LAMBDA);
        if depth >= self.p.max_depth || n < 2 * self.p.min_samples_leaf {
            self.leaves.push((idx.to_vec(), leaf));
            return;
        }
        let parent = score(g, h);
        let mut best: Option<(f64, usize, usize)> = None;
        for &c in self.cols {
            let nb = self.bins.n_bins[c];
            if nb < 2 {
                continue;
            }
            let code = self.bins.column(c);
            self.hist[..nb].fill(Bin::default());
            for &i in idx.iter() {
                let b = &mut self.hist[code[i] as usize];
                b.g += self.grad[i];
                b.h += self.hess[i];
                b.n += 1;
            }
            let mut left = Bin::default();
            for b in 0..nb - 1 {
                let hb = self.hist[b];
                left.g += hb.g;
                left.h += hb.h;
                left.n += hb.n;
                if left.n < self.p.min_samples_leaf {
                    continue;
                }
                if n - left.n < self.p.min_samples_leaf {
                    break;
                }
                let gain = 0.5 * (score(left.g, left.h) + score(g - left.g, h - left.h) - parent);
                if gain > 1e-12 && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, c, b));
                }
            }
        }
        let Some((gain, c, b)) = best else {
            self.leaves.push((idx.to_vec(), leaf));
            return;
        };
        self.importance[self.col_field[c]] += gain;
        let code = self.bins.column(c);
        let mid = partition(idx, |i| code[i] as usize <= b);
        let (l, r) = idx.split_at_mut(mid);
        self.grow(l, depth + 1);
        self.grow(r, depth + 1);
    }
}

/// Softmax gradient boosting (one regression tree per class per round);
/// importance is total split gain pooled per field.
pub fn fit_gbdt_importance(x: &EncodedMatrix, y: &[usize], p: &TreeParams) -> Result<ImportanceRanking> {
    p.validate()?;
    let counts = require_two_classes(x, y)?;
    let bins = Binned::new(x);
    let col_field = x.column_fields();
    let n = x.n_rows();
    let m = p.columns_per_split(x.n_cols());
    let k = NUM_CLASSES;

    // base score: log class priors (absent classes get a large negative margin)
    let prior: Vec<f64> = counts
        .iter()
        .map(|&c| if c > 0 { (c as f64 / n as f64).ln() } else { -30.0 })
        .collect();
    let mut margin: Vec<f64> = (0..n).flat_map(|_| prior.iter().copied()).collect();
    let mut importance = vec![0.0; x.schema().num_fields()];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut prob = vec![0.0; n * k];

    for round in 0..p.n_trees {
        for i in 0..n {
            let row = &margin[i * k..(i + 1) * k];
            let mx = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for c in 0..k {
                prob[i * k + c] = (row[c] - mx).exp();
                z += prob[i * k + c];
            }
            for c in 0..k {
                prob[i * k + c] /= z;
            }
        }
        for class in 0..k {
            for i in 0..n {
                let pi = prob[i * k + class];
                grad[i] = pi - if y[i] == class { 1.0 } else { 0.0 };
                hess[i] = (pi * (1.0 - pi)).max(1e-16);
            }
            let cols: Vec<usize> = if m == x.n_cols() {
                (0..m).collect()
            } else {
                let mut rng = rng_for(p.seed, "gbdt-tree", (round * k + class) as u64);
                let mut c = index::sample(&mut rng, x.n_cols(), m).into_vec();
                c.sort_unstable();
                c
            };
            let mut tree = Tree {
                bins: &bins,
                grad: &grad,
                hess: &hess,
                cols: &cols,
                col_field: &col_field,
                p,
                importance: &mut importance,
                hist: vec![Bin::default(); MAX_BINS + 1],
                leaves: Vec::new(),
            };
            let mut idx: Vec<usize> = (0..n).collect();
            tree.grow(&mut idx, 0);
            for (rows, w) in tree.leaves {
                for i in rows {
                    margin[i * k + class] += p.learning_rate * w;
                }
            }
        }
        if margin.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("boosting margins diverged at round {round}")));
        }
    }
    ImportanceRanking::from_raw(x.schema(), &importance)
}
