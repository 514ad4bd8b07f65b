//! Gated multi-head attention over field embeddings feeding exponential
//! (multiplicative) interaction neurons, then a residual MLP.

use rand_chacha::ChaCha8Rng;
use sev_autodiff::{DropoutMode, Graph, NodeId, ParamStore, Scalar};

use super::hyper::HyperParams;
use super::init::{Dense, Init, Norm};
use super::layers::{affine, dropout, norm};
use crate::error::Result;
use crate::seed::rng_for;

/// Added inside the log so zero embedding entries stay finite.
pub const LOG_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
struct Block {
    norm: Norm,
    dense: Dense,
}

#[derive(Debug, Clone)]
pub struct ArmNet<T> {
    hp: HyperParams,
    ranges: Vec<(usize, usize)>,
    params: ParamStore<T>,
    embed: usize,
    query: usize,
    gate: usize,
    in_norm: Norm,
    proj: Dense,
    blocks: Vec<Block>,
    head: Dense,
}

/// Intermediate nodes of one forward pass.
pub struct ArmTrace {
    /// `B × (heads·cross) × F`, rows sum to 1 over fields.
    pub attention: NodeId,
    /// `B × (heads·cross) × E`.
    pub interaction: NodeId,
    pub logits: NodeId,
}

/// `exp(α · log(|e| + ε))` per row: `alpha: B×K×F`, `embedded: B×F×E` → `B×K×E`.
pub fn exp_interaction<T: Scalar>(g: &mut Graph<T>, alpha: NodeId, embedded: NodeId) -> Result<NodeId> {
    let a = g.abs(embedded);
    let a = g.add_scalar(a, LOG_EPS);
    let lg = g.log(a)?;
    let s = g.matmul(alpha, lg)?;
    Ok(g.exp(s)?)
}

impl<T: Scalar> ArmNet<T> {
    pub fn new(hp: &HyperParams, ranges: &[(usize, usize)], seed: u64) -> Self {
        let (f, e, k) = (ranges.len(), hp.embed_dim, hp.num_heads * hp.num_cross);
        let mut params = ParamStore::new();
        let mut init = Init {
            store: &mut params,
            rng: rng_for(seed, "init-armnet", 0),
        };
        let embed = init.uniform("embed", &[hp.input_dim, e], 0.05);
        let query = init.uniform("attn.query", &[e, k], 1.0 / (e as f64).sqrt());
        // zero gate logits: every field starts half open
        let gate = init.fill("attn.gate", &[f, k], 0.0);
        let in_norm = init.norm("inter.norm", k * e);
        let proj = init.dense("inter.proj", k * e, hp.hidden_dim);
        let blocks = (0..hp.num_layers)
            .map(|i| Block {
                norm: init.norm(&format!("block{i}.norm"), hp.hidden_dim),
                dense: init.dense(&format!("block{i}.dense"), hp.hidden_dim, hp.hidden_dim),
            })
            .collect();
        let head = init.dense("head", hp.hidden_dim, hp.output_dim);
        Self {
            hp: hp.clone(),
            ranges: ranges.to_vec(),
            params,
            embed,
            query,
            gate,
            in_norm,
            proj,
            blocks,
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

    /// Attention weights `B×K×F`: softmax over fields of `e·q + log σ(gate)`.
    pub fn attention(&self, g: &mut Graph<T>, p: &[NodeId], embedded: NodeId) -> Result<NodeId> {
        let scores = g.matmul(embedded, p[self.query])?; // B×F×K
        let gate = g.sigmoid(p[self.gate]);
        let log_gate = g.log(gate)?;
        let gated = g.add(scores, log_gate)?;
        let alpha = g.softmax(gated, 1)?;
        Ok(g.transpose(alpha)?)
    }

    pub fn trace(&self, g: &mut Graph<T>, p: &[NodeId], x: NodeId, mode: DropoutMode, rng: &mut ChaCha8Rng) -> Result<ArmTrace> {
        let b = g.shape(x)[0];
        let k = self.hp.num_heads * self.hp.num_cross;
        let emb = g.embedding(x, p[self.embed], &self.ranges)?;
        let attention = self.attention(g, p, emb)?;
        let interaction = exp_interaction(g, attention, emb)?;
        let flat = g.reshape(interaction, &[b, k * self.hp.embed_dim])?;
        let h = norm(g, p, flat, self.in_norm)?;
        let h = dropout(g, h, self.hp.dropout_rate, mode, rng)?;
        let h = affine(g, p, h, self.proj)?;
        let mut h = g.relu(h);
        for blk in &self.blocks {
            let z = norm(g, p, h, blk.norm)?;
            let z = affine(g, p, z, blk.dense)?;
            let z = g.relu(z);
            let z = dropout(g, z, self.hp.dropout_rate, mode, rng)?;
            h = g.add(h, z)?;
        }
        let logits = affine(g, p, h, self.head)?;
        Ok(ArmTrace {
            attention,
            interaction,
            logits,
        })
    }
}
