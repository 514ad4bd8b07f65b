use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sev_autodiff::{AdamW, DropoutMode, Graph, PlateauState, Scalar, Tensor};

use crate::error::{Error, Result};
use crate::models::{Classifier, HyperParams, ModelKind, PREDICT_CHUNK};
use crate::resample::ResampleParams;
use crate::seed::rng_for;
use crate::tabular::{class_weights, EncodedMatrix, SplitSpec, NUM_CLASSES};
use crate::train::history::{EpochRecord, TrainHistory};

/// Everything needed to reproduce one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub model: ModelKind,
    pub hyper: HyperParams,
    pub split: SplitSpec,
    pub resample: ResampleParams,
    /// Early-stop patience in epochs.
    pub patience: usize,
    pub min_delta: f64,
    /// Balanced class weights in the training loss.
    pub class_weighting: bool,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
    pub seed: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            model: ModelKind::Armnet,
            hyper: HyperParams::default(),
            split: SplitSpec::default(),
            resample: ResampleParams::default(),
            patience: 10,
            min_delta: 1e-8,
            class_weighting: true,
            plateau_patience: 5,
            plateau_factor: 0.5,
            min_lr: 1e-6,
            seed: 0,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        if self.hyper.epochs == 0 {
            return Err(Error::Param("epochs must be at least 1".into()));
        }
        if self.patience == 0 || self.plateau_patience == 0 {
            return Err(Error::Param("patience must be at least 1".into()));
        }
        if !(self.plateau_factor > 0.0 && self.plateau_factor < 1.0) {
            return Err(Error::Param(format!("plateau_factor {} outside (0, 1)", self.plateau_factor)));
        }
        if !(self.min_delta >= 0.0) || !(self.min_lr >= 0.0) {
            return Err(Error::Param("min_delta and min_lr must be nonnegative".into()));
        }
        self.split.validate()?;
        self.resample.validate()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Parameters from the best-val-loss epoch.
    pub model: Classifier<T>,
    pub history: TrainHistory,
    pub best_epoch: usize,
    pub early_stopped: bool,
    pub class_weights: Option<Vec<f64>>,
}

impl<T> TrainOutcome<T> {
    pub fn best(&self) -> &EpochRecord {
        &self.history.rows[self.best_epoch - 1]
    }
}

/// Mean cross-entropy and accuracy in eval mode.
pub fn evaluate_loss<T: Scalar>(model: &Classifier<T>, x: &EncodedMatrix) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for start in (0..x.n_rows()).step_by(PREDICT_CHUNK) {
        let n = PREDICT_CHUNK.min(x.n_rows() - start);
        let logits = model.logits(&x.data()[start * x.n_cols()..(start + n) * x.n_cols()], n)?.to_f64_vec();
        for (r, row) in logits.chunks(NUM_CLASSES).enumerate() {
            let y = x.labels()[start + r];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            loss += lse - row[y];
            if argmax(row) == y {
                correct += 1;
            }
        }
    }
    Ok((loss / x.n_rows() as f64, correct as f64 / x.n_rows() as f64))
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Row visiting order for one epoch: a seeded permutation of `0..n`.
pub fn epoch_order(seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "epoch", epoch as u64));
    order
}

/// Builds a model from `spec` and trains it.
pub fn train_model<T: Scalar>(spec: &RunSpec, train: &EncodedMatrix, val: &EncodedMatrix) -> Result<TrainOutcome<T>> {
    let model = Classifier::<T>::for_schema(spec.model, &spec.hyper, train.schema(), spec.seed)?;
    train_from(spec, model, train, val)
}

/// Mini-batch AdamW with reduce-on-plateau and early stopping on val loss.
pub fn train_from<T: Scalar>(
    spec: &RunSpec,
    mut model: Classifier<T>,
    train: &EncodedMatrix,
    val: &EncodedMatrix,
) -> Result<TrainOutcome<T>> {
    spec.validate()?;
    if train.n_rows() == 0 || val.n_rows() == 0 {
        return Err(Error::Data("train and validation splits must be non-empty".into()));
    }
    if train.schema() != val.schema() {
        return Err(Error::SchemaMismatch("train and validation schemas differ".into()));
    }
    if train.n_cols() != model.hyper().input_dim {
        return Err(Error::SchemaMismatch(format!(
            "matrix has {} columns, model expects {}",
            train.n_cols(),
            model.hyper().input_dim
        )));
    }
    let hp = model.hyper().clone();
    let weights = if spec.class_weighting {
        Some(class_weights(train.labels(), NUM_CLASSES)?)
    } else {
        None
    };
    let loss_weights = weights.clone().unwrap_or_else(|| vec![1.0; NUM_CLASSES]);

    let mut opt = AdamW::<T>::new(hp.lr, hp.weight_decay);
    let mut plateau = PlateauState::new(spec.plateau_patience, spec.plateau_factor, spec.min_lr);
    plateau.threshold = spec.min_delta;
    let mut history = TrainHistory::default();
    let mut best_params = model.params().clone();
    let mut best_loss = f64::INFINITY;
    // patience reference: only improvements beyond min_delta reset the counter
    let mut patience_ref = f64::INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut early_stopped = false;
    let n = train.n_rows();
    let d = train.n_cols();
    let mut xbuf = Vec::with_capacity(hp.batch_size * d);

    for epoch in 1..=hp.epochs {
        let order = epoch_order(spec.seed, epoch, n);
        let mut drop_rng = rng_for(spec.seed, "dropout", epoch as u64);
        let lr = opt.lr();
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (b, batch) in order.chunks(hp.batch_size).enumerate() {
            xbuf.clear();
            for &i in batch {
                xbuf.extend_from_slice(train.row(i));
            }
            let targets: Vec<usize> = batch.iter().map(|&i| train.labels()[i]).collect();
            let mut g = Graph::<T>::new();
            let p = model.params().bind(&mut g);
            let x = g.constant(Tensor::from_f64(&[batch.len(), d], &xbuf)?);
            let logits = model.forward(&mut g, &p, x, DropoutMode::Train, &mut drop_rng)?;
            let loss = g.weighted_cross_entropy(logits, &targets, &loss_weights)?;
            let lv = g.value(loss).to_f64_vec()[0];
            if !lv.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite training loss {lv} at epoch {epoch}, batch {b} (lr {lr})"
                )));
            }
            for (row, &y) in g.value(logits).to_f64_vec().chunks(NUM_CLASSES).zip(&targets) {
                if argmax(row) == y {
                    correct += 1;
                }
            }
            loss_sum += lv * batch.len() as f64;
            let grads = g.backward(loss)?;
            let gs: Vec<Tensor<T>> = p
                .iter()
                .zip(model.params().tensors())
                .map(|(&id, t)| grads.get(id).cloned().unwrap_or_else(|| Tensor::zeros(t.shape())))
                .collect();
            opt.step(model.params_mut().tensors_mut(), &gs)?;
        }
        let (val_loss, val_acc) = evaluate_loss(&model, val)?;
        if !val_loss.is_finite() {
            return Err(Error::Numerical(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.rows.push(EpochRecord {
            epoch,
            train_loss: loss_sum / n as f64,
            train_acc: correct as f64 / n as f64,
            val_loss,
            val_acc,
            lr,
        });
        opt.set_lr(plateau.step(val_loss, lr));
        if val_loss < best_loss {
            best_loss = val_loss;
            best_epoch = epoch;
            best_params = model.params().clone();
        }
        if val_loss < patience_ref - spec.min_delta {
            patience_ref = val_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= spec.patience {
                early_stopped = epoch < hp.epochs;
                break;
            }
        }
    }
    model.params_mut().load_from(&best_params)?;
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        early_stopped,
        class_weights: weights,
    })
}
