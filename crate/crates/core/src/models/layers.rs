use rand_chacha::ChaCha8Rng;
use sev_autodiff::{DropoutMode, Graph, NodeId, Scalar};

use super::init::{Dense, Norm};
use crate::error::Result;

pub(crate) const LN_EPS: f64 = 1e-5;

pub(crate) fn affine<T: Scalar>(g: &mut Graph<T>, p: &[NodeId], x: NodeId, d: Dense) -> Result<NodeId> {
    let h = g.matmul(x, p[d.w])?;
    Ok(g.add(h, p[d.b])?)
}

pub(crate) fn norm<T: Scalar>(g: &mut Graph<T>, p: &[NodeId], x: NodeId, n: Norm) -> Result<NodeId> {
    Ok(g.layer_norm(x, p[n.gamma], p[n.beta], LN_EPS)?)
}

pub(crate) fn dropout<T: Scalar>(
    g: &mut Graph<T>,
    x: NodeId,
    rate: f64,
    mode: DropoutMode,
    rng: &mut ChaCha8Rng,
) -> Result<NodeId> {
    Ok(g.dropout(x, rate, mode, rng)?)
}
