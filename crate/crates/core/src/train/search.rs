use std::cmp::Ordering;
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sev_autodiff::Scalar;

use crate::error::{Error, Result};
use crate::models::Classifier;
use crate::seed::{derive_seed, rng_for};
use crate::tabular::EncodedMatrix;
use crate::train::history::TrainHistory;
use crate::train::run::{train_model, RunSpec};

/// Candidate lists; each draw picks one entry per list independently.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub lr: Vec<f64>,
    pub dropout_rate: Vec<f64>,
    pub batch_size: Vec<usize>,
    /// ARM-Net block width.
    pub hidden_dim: Vec<usize>,
    /// MambaNet dense stack.
    pub hidden_dims: Vec<Vec<usize>>,
    pub weight_decay: Vec<f64>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            lr: vec![1e-2, 1e-3, 1e-4],
            dropout_rate: vec![0.1, 0.3, 0.5],
            batch_size: vec![32, 64],
            hidden_dim: vec![64, 128],
            hidden_dims: vec![vec![128, 64], vec![64, 32], vec![256, 128]],
            weight_decay: vec![1e-4],
        }
    }
}

fn pick<'a, T, R: Rng>(rng: &mut R, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("lr", self.lr.is_empty()),
            ("dropout_rate", self.dropout_rate.is_empty()),
            ("batch_size", self.batch_size.is_empty()),
            ("hidden_dim", self.hidden_dim.is_empty()),
            ("hidden_dims", self.hidden_dims.is_empty()),
            ("weight_decay", self.weight_decay.is_empty()),
        ];
        match empty.iter().find(|e| e.1) {
            Some((name, _)) => Err(Error::Param(format!("search list {name} is empty"))),
            None => Ok(()),
        }
    }

    /// The `index`-th draw over `base`, with its own derived training seed.
    pub fn draw(&self, base: &RunSpec, index: usize) -> RunSpec {
        let mut rng = rng_for(base.seed, "draw", index as u64);
        let mut spec = base.clone();
        spec.hyper.lr = *pick(&mut rng, &self.lr);
        spec.hyper.dropout_rate = *pick(&mut rng, &self.dropout_rate);
        spec.hyper.batch_size = *pick(&mut rng, &self.batch_size);
        spec.hyper.hidden_dim = *pick(&mut rng, &self.hidden_dim);
        spec.hyper.hidden_dims = pick(&mut rng, &self.hidden_dims).clone();
        spec.hyper.weight_decay = *pick(&mut rng, &self.weight_decay);
        spec.seed = derive_seed(base.seed, "draw-train", index as u64);
        spec
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub draw: usize,
    pub spec: RunSpec,
    pub val_loss: Option<f64>,
    pub val_acc: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub error: Option<String>,
}

impl LeaderboardEntry {
    /// Val loss ascending, val accuracy descending, draw order; failures last.
    pub fn cmp_key(&self, other: &Self) -> Ordering {
        match (self.val_loss, other.val_loss) {
            (Some(a), Some(b)) => a
                .total_cmp(&b)
                .then_with(|| other.val_acc.unwrap_or(0.0).total_cmp(&self.val_acc.unwrap_or(0.0)))
                .then(self.draw.cmp(&other.draw)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.draw.cmp(&other.draw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub entries: Vec<LeaderboardEntry>,
}

impl Leaderboard {
    pub fn winner(&self) -> &LeaderboardEntry {
        &self.entries[0]
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn write_json<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_json_string()?.as_bytes())
            .map_err(|e| Error::io("<leaderboard writer>", e))
    }
}

#[derive(Debug, Clone)]
pub struct SearchOutcome<T> {
    pub best: RunSpec,
    pub model: Classifier<T>,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub early_stopped: bool,
    pub class_weights: Option<Vec<f64>>,
    pub leaderboard: Leaderboard,
}

/// Trains `n` seeded draws (in parallel) and ranks them. Individual failures
/// are recorded on the leaderboard; only an all-failed search is an error.
pub fn random_search<T: Scalar>(
    space: &SearchSpace,
    n: usize,
    base: &RunSpec,
    train: &EncodedMatrix,
    val: &EncodedMatrix,
) -> Result<SearchOutcome<T>> {
    space.validate()?;
    if n == 0 {
        return Err(Error::Param("random search needs at least one draw".into()));
    }
    let results: Vec<_> = (0..n)
        .into_par_iter()
        .map(|i| {
            let spec = space.draw(base, i);
            let out = train_model::<T>(&spec, train, val);
            (i, spec, out)
        })
        .collect();

    let mut entries = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for (draw, spec, out) in results {
        let entry = match &out {
            Ok(o) => LeaderboardEntry {
                rank: 0,
                draw,
                spec: spec.clone(),
                val_loss: Some(o.best().val_loss),
                val_acc: Some(o.best().val_acc),
                best_epoch: Some(o.best_epoch),
                epochs_run: Some(o.history.len()),
                error: None,
            },
            Err(e) => LeaderboardEntry {
                rank: 0,
                draw,
                spec: spec.clone(),
                val_loss: None,
                val_acc: None,
                best_epoch: None,
                epochs_run: None,
                error: Some(e.to_string()),
            },
        };
        entries.push(entry);
        outcomes.push((spec, out));
    }
    if entries.iter().all(|e| e.error.is_some()) {
        return Err(Error::Data(format!("all {n} search draws failed; first: {}", entries[0].error.as_deref().unwrap_or(""))));
    }
    entries.sort_by(|a, b| a.cmp_key(b));
    for (r, e) in entries.iter_mut().enumerate() {
        e.rank = r + 1;
    }
    let (best, out) = outcomes.swap_remove(entries[0].draw);
    let out = out.expect("winner trained successfully");
    Ok(SearchOutcome {
        best,
        model: out.model,
        history: out.history,
        best_epoch: out.best_epoch,
        early_stopped: out.early_stopped,
        class_weights: out.class_weights,
        leaderboard: Leaderboard { entries },
    })
}
