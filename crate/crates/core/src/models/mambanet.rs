//! Conv + LSTM over the embedded field sequence (schema order), then a dense
//! head. The `Dense` variant skips the sequence body and feeds the encoded row
//! straight into the head.

use rand_chacha::ChaCha8Rng;
use sev_autodiff::{DropoutMode, Graph, NodeId, ParamStore, Scalar, Tensor};

use super::hyper::{HyperParams, MambaVariant};
use super::init::{Dense, Init};
use super::layers::{affine, dropout};
use crate::error::Result;
use crate::seed::rng_for;

#[derive(Debug, Clone, Copy)]
struct Conv {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Lstm {
    wx: usize,
    wh: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct Body {
    embed: usize,
    convs: Vec<Conv>,
    lstm: Lstm,
}

#[derive(Debug, Clone)]
pub struct MambaNet<T> {
    hp: HyperParams,
    ranges: Vec<(usize, usize)>,
    params: ParamStore<T>,
    body: Option<Body>,
    dense: Vec<Dense>,
    head: Dense,
}

impl<T: Scalar> MambaNet<T> {
    pub fn new(hp: &HyperParams, ranges: &[(usize, usize)], seed: u64) -> Self {
        let e = hp.embed_dim;
        let mut params = ParamStore::new();
        let mut init = Init {
            store: &mut params,
            rng: rng_for(seed, "init-mambanet", 0),
        };
        let (body, mut width) = match hp.mamba_variant {
            MambaVariant::CnnLstm => {
                let embed = init.uniform("embed", &[hp.input_dim, e], 0.05);
                let cb = 1.0 / ((e * hp.conv_width) as f64).sqrt();
                let convs = (0..hp.conv_layers)
                    .map(|i| Conv {
                        w: init.uniform(&format!("conv{i}.w"), &[e, e, hp.conv_width], cb),
                        b: init.uniform(&format!("conv{i}.b"), &[e], cb),
                    })
                    .collect();
                let h = hp.lstm_hidden;
                let lb = 1.0 / (h as f64).sqrt();
                let lstm = Lstm {
                    wx: init.uniform("lstm.wx", &[e, 4 * h], lb),
                    wh: init.uniform("lstm.wh", &[h, 4 * h], lb),
                    b: init.uniform("lstm.b", &[4 * h], lb),
                };
                (Some(Body { embed, convs, lstm }), h)
            }
            MambaVariant::Dense => (None, hp.input_dim),
        };
        let mut dense = Vec::new();
        for (i, &d) in hp.hidden_dims.iter().enumerate() {
            dense.push(init.dense(&format!("dense{i}"), width, d));
            width = d;
        }
        let head = init.dense("head", width, hp.output_dim);
        Self {
            hp: hp.clone(),
            ranges: ranges.to_vec(),
            params,
            body,
            dense,
            head,
        }
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hp
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Final LSTM hidden state `B×H` (or the raw input for the dense variant).
    pub fn encode(&self, g: &mut Graph<T>, p: &[NodeId], x: NodeId) -> Result<NodeId> {
        let Some(body) = &self.body else { return Ok(x) };
        let b = g.shape(x)[0];
        let (f, e, hd) = (self.ranges.len(), self.hp.embed_dim, self.hp.lstm_hidden);
        let mut s = g.embedding(x, p[body.embed], &self.ranges)?;
        for c in &body.convs {
            let z = g.conv1d(s, p[c.w], p[c.b])?;
            s = g.relu(z);
        }
        let mut h = g.constant(Tensor::zeros(&[b, hd]));
        let mut c = g.constant(Tensor::zeros(&[b, hd]));
        for t in 0..f {
            let step = g.slice(s, 1, t, 1)?;
            let step = g.reshape(step, &[b, e])?;
            let hc = g.lstm_cell(step, h, c, p[body.lstm.wx], p[body.lstm.wh], p[body.lstm.b])?;
            h = g.slice(hc, 1, 0, hd)?;
            c = g.slice(hc, 1, hd, hd)?;
        }
        Ok(h)
    }

    pub fn forward(&self, g: &mut Graph<T>, p: &[NodeId], x: NodeId, mode: DropoutMode, rng: &mut ChaCha8Rng) -> Result<NodeId> {
        let mut h = self.encode(g, p, x)?;
        for d in &self.dense {
            let z = affine(g, p, h, *d)?;
            let z = g.relu(z);
            h = dropout(g, z, self.hp.dropout_rate, mode, rng)?;
        }
        affine(g, p, h, self.head)
    }
}
