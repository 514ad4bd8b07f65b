//! The two classifiers, inference, and checkpoints with metadata sidecars.

mod armnet;
mod checkpoint;
mod hyper;
mod init;
mod layers;
mod mambanet;

pub use armnet::{exp_interaction, ArmNet, ArmTrace, LOG_EPS};
pub use checkpoint::{load_checkpoint, meta_path_for, save_checkpoint, ModelMeta, TrainingSummary, META_VERSION};
pub use hyper::{HyperParams, MambaVariant, ModelKind};
pub use mambanet::MambaNet;

use rand_chacha::ChaCha8Rng;
use sev_autodiff::gradcheck::{check_gradients, GradCheck};
use sev_autodiff::{kernels, AutodiffError, DropoutMode, Graph, NodeId, ParamStore, Scalar, Tensor};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::tabular::{EncodedMatrix, Schema, NUM_CLASSES};

#[derive(Debug, Clone)]
pub enum Classifier<T> {
    Armnet(ArmNet<T>),
    Mambanet(MambaNet<T>),
}

/// Field column ranges as `(start, end)` pairs.
pub fn field_ranges(schema: &Schema) -> Vec<(usize, usize)> {
    crate::tabular::column_map(schema).iter().map(|r| (r.start, r.end)).collect()
}

fn ranges_from_sizes(sizes: &[usize]) -> Vec<(usize, usize)> {
    let mut start = 0;
    sizes
        .iter()
        .map(|&n| {
            start += n;
            (start - n, start)
        })
        .collect()
}

impl<T: Scalar> Classifier<T> {
    /// Builds a freshly initialized model; `hp.input_dim` is taken from the ranges.
    pub fn new(kind: ModelKind, hp: &HyperParams, ranges: &[(usize, usize)], seed: u64) -> Result<Self> {
        let mut hp = hp.clone();
        hp.input_dim = ranges.last().map_or(0, |r| r.1);
        hp.validate()?;
        if ranges.is_empty() || ranges.windows(2).any(|w| w[0].1 != w[1].0) || ranges[0].0 != 0 {
            return Err(Error::Param("field ranges must tile the columns".into()));
        }
        Ok(match kind {
            ModelKind::Armnet => Classifier::Armnet(ArmNet::new(&hp, ranges, seed)),
            ModelKind::Mambanet => Classifier::Mambanet(MambaNet::new(&hp, ranges, seed)),
        })
    }

    pub fn for_schema(kind: ModelKind, hp: &HyperParams, schema: &Schema, seed: u64) -> Result<Self> {
        Self::new(kind, hp, &field_ranges(schema), seed)
    }

    pub fn from_field_sizes(kind: ModelKind, hp: &HyperParams, sizes: &[usize], seed: u64) -> Result<Self> {
        Self::new(kind, hp, &ranges_from_sizes(sizes), seed)
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Classifier::Armnet(_) => ModelKind::Armnet,
            Classifier::Mambanet(_) => ModelKind::Mambanet,
        }
    }

    pub fn hyper(&self) -> &HyperParams {
        match self {
            Classifier::Armnet(m) => m.hyper(),
            Classifier::Mambanet(m) => m.hyper(),
        }
    }

    pub fn params(&self) -> &ParamStore<T> {
        match self {
            Classifier::Armnet(m) => m.params(),
            Classifier::Mambanet(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        match self {
            Classifier::Armnet(m) => m.params_mut(),
            Classifier::Mambanet(m) => m.params_mut(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.params().num_scalars()
    }

    /// Logits node `B×3` for input node `x: B×D`.
    pub fn forward(&self, g: &mut Graph<T>, p: &[NodeId], x: NodeId, mode: DropoutMode, rng: &mut ChaCha8Rng) -> Result<NodeId> {
        let d = self.hyper().input_dim;
        let sx = g.shape(x);
        if sx.len() != 2 || sx[1] != d {
            return Err(Error::Data(format!("batch shape {sx:?} does not match input_dim {d}")));
        }
        match self {
            Classifier::Armnet(m) => Ok(m.trace(g, p, x, mode, rng)?.logits),
            Classifier::Mambanet(m) => m.forward(g, p, x, mode, rng),
        }
    }

    /// Eval-mode logits for a row-major `rows × input_dim` block.
    pub fn logits(&self, rows: &[f64], n_rows: usize) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let p = self.params().bind_frozen(&mut g);
        let x = g.constant(Tensor::from_f64(&[n_rows, self.hyper().input_dim], rows)?);
        // eval mode never draws from the stream
        let mut rng = rng_for(0, "eval", 0);
        let out = self.forward(&mut g, &p, x, DropoutMode::Eval, &mut rng)?;
        Ok(g.value(out).clone())
    }
}

/// Row labels (argmax, ties to the lower class) and softmax probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub labels: Vec<usize>,
    /// Row-major `n × 3`.
    pub probabilities: Vec<f64>,
}

pub(crate) const PREDICT_CHUNK: usize = 512;

pub fn probabilities_from_logits(logits: &[f64]) -> Predictions {
    let probabilities = kernels::softmax_forward(logits, logits.len() / NUM_CLASSES, NUM_CLASSES, 1);
    let labels = probabilities
        .chunks(NUM_CLASSES)
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Predictions { labels, probabilities }
}

pub fn predict<T: Scalar>(model: &Classifier<T>, x: &EncodedMatrix) -> Result<Predictions> {
    if x.n_cols() != model.hyper().input_dim {
        return Err(Error::SchemaMismatch(format!(
            "matrix has {} columns, model expects {}",
            x.n_cols(),
            model.hyper().input_dim
        )));
    }
    let mut logits = Vec::with_capacity(x.n_rows() * NUM_CLASSES);
    for start in (0..x.n_rows()).step_by(PREDICT_CHUNK) {
        let n = PREDICT_CHUNK.min(x.n_rows() - start);
        let rows = &x.data()[start * x.n_cols()..(start + n) * x.n_cols()];
        logits.extend(model.logits(rows, n)?.to_f64_vec());
    }
    Ok(probabilities_from_logits(&logits))
}

/// Central-difference check of loss(forward(x)) with respect to every
/// parameter, at the model's current values. Dropout runs in train mode with
/// a mask fixed by `mask_seed`.
pub fn model_gradcheck(
    model: &Classifier<f64>,
    rows: &[f64],
    targets: &[usize],
    class_weights: &[f64],
    mask_seed: u64,
    eps: f64,
) -> Result<GradCheck> {
    let n = targets.len();
    let d = model.hyper().input_dim;
    let x = Tensor::from_f64(&[n, d], rows)?;
    let inputs = model.params().tensors().to_vec();
    Ok(check_gradients(&inputs, eps, |g: &mut Graph<f64>, ids: &[NodeId]| {
        let xn = g.constant(x.clone());
        let mut rng = rng_for(mask_seed, "gradcheck-dropout", 0);
        let logits = model
            .forward(g, ids, xn, DropoutMode::Train, &mut rng)
            .map_err(|e| AutodiffError::Invalid(e.to_string()))?;
        g.weighted_cross_entropy(logits, targets, class_weights)
    })?)
}
