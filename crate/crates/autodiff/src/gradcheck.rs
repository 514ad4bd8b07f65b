//! Central finite-difference gradient checking in 64-bit.

use crate::error::{AutodiffError, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::Tensor;

/// Outcome of comparing analytic and numerical gradients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `|analytic − numeric| / max(|analytic|, |numeric|, floor)` seen.
    pub max_rel_error: f64,
    /// Input index and flat element index where it occurred.
    pub worst: (usize, usize),
    pub checked: usize,
}

/// Denominator floor; below it the comparison is effectively absolute.
pub const REL_FLOOR: f64 = 1e-3;

/// Rebuilds the graph via `build` for every perturbation. `build` receives one
/// node per input (all bound as parameters) and must return a scalar loss.
/// Any randomness inside `build` must be fixed (e.g. seeded dropout masks).
pub fn check_gradients<F>(inputs: &[Tensor<f64>], eps: f64, build: F) -> Result<GradCheck>
where
    F: Fn(&mut Graph<f64>, &[NodeId]) -> Result<NodeId>,
{
    let eval = |vals: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let ids: Vec<NodeId> = vals.iter().map(|t| g.param(t.clone())).collect();
        let loss = build(&mut g, &ids)?;
        let v = g.value(loss);
        if !v.is_scalar() {
            return Err(AutodiffError::NonScalarLoss(v.shape().to_vec()));
        }
        Ok(v.data()[0])
    };

    let mut g = Graph::new();
    let ids: Vec<NodeId> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let loss = build(&mut g, &ids)?;
    let grads = g.backward(loss)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    for (ti, id) in ids.iter().enumerate() {
        let analytic = grads
            .get(*id)
            .map(|t| t.data().to_vec())
            .unwrap_or_else(|| vec![0.0; inputs[ti].len()]);
        for ei in 0..inputs[ti].len() {
            let orig = inputs[ti].data()[ei];
            work[ti].data_mut()[ei] = orig + eps;
            let up = eval(&work)?;
            work[ti].data_mut()[ei] = orig - eps;
            let down = eval(&work)?;
            work[ti].data_mut()[ei] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ei];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            report.checked += 1;
            if rel > report.max_rel_error || rel.is_nan() {
                report.max_rel_error = if rel.is_nan() { f64::INFINITY } else { rel };
                report.worst = (ti, ei);
            }
        }
    }
    Ok(report)
}
