//! AdamW (decoupled weight decay) and classic Adam.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Result};
use crate::scalar::{lit, Scalar};
use crate::tensor::Tensor;

/// Moment estimates and hyperparameters shared by [`AdamW`] and [`Adam`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OptState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    first_moment: Vec<Tensor<T>>,
    second_moment: Vec<Tensor<T>>,
}

impl<T: Scalar> OptState<T> {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    fn ensure_moments(&mut self, params: &[Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        if params.len() != grads.len() {
            return shape_err(
                "optimizer",
                format!("{} parameters but {} gradients", params.len(), grads.len()),
            );
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return shape_err(
                    "optimizer",
                    format!("parameter {i} shape {:?} vs gradient {:?}", p.shape(), g.shape()),
                );
            }
        }
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|p| Tensor::zeros(p.shape())).collect();
            self.second_moment = self.first_moment.clone();
        } else if self.first_moment.len() != params.len()
            || self.first_moment.iter().zip(params).any(|(m, p)| m.shape() != p.shape())
        {
            return shape_err("optimizer", "parameter set changed between steps");
        }
        Ok(())
    }

    /// Adam moment update and bias-corrected step; `decoupled_decay` selects AdamW.
    fn update(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>], decoupled_decay: bool) -> Result<()> {
        self.ensure_moments(params, grads)?;
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (lit::<T>(self.beta1), lit::<T>(self.beta2));
        let one = T::one();
        let bc1 = lit::<T>(1.0 - self.beta1.powi(t));
        let bc2 = lit::<T>(1.0 - self.beta2.powi(t));
        let lr = lit::<T>(self.lr);
        let eps = lit::<T>(self.eps);
        let wd = lit::<T>(self.weight_decay);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
        {
            let pd = p.data_mut();
            for (i, &gi) in g.data().iter().enumerate() {
                let grad = if decoupled_decay { gi } else { gi + wd * pd[i] };
                let mi = &mut m.data_mut()[i];
                *mi = b1 * *mi + (one - b1) * grad;
                let mhat = *mi / bc1;
                let vi = &mut v.data_mut()[i];
                *vi = b2 * *vi + (one - b2) * grad * grad;
                let vhat = *vi / bc2;
                if decoupled_decay {
                    pd[i] -= lr * wd * pd[i];
                }
                pd[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Adam with decoupled weight decay: `θ ← θ − lr·wd·θ` then the adaptive step.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AdamW<T> {
    pub state: OptState<T>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            state: OptState::new(lr, weight_decay),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        self.state.update(params, grads, true)
    }

    pub fn lr(&self) -> f64 {
        self.state.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.state.lr = lr;
    }
}

/// Adam with L2 penalty folded into the gradient.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Adam<T> {
    pub state: OptState<T>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            state: OptState::new(lr, weight_decay),
        }
    }

    pub fn step(&mut self, params: &mut [Tensor<T>], grads: &[Tensor<T>]) -> Result<()> {
        self.state.update(params, grads, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Vec<Tensor<f64>> {
        vec![Tensor::scalar(v)]
    }

    #[test]
    fn zero_gradient_no_decay_is_noop() {
        let mut opt = AdamW::<f64>::new(0.1, 0.0);
        let mut p = vec![Tensor::from_f64(&[3], &[1.0, -2.0, 0.5]).unwrap()];
        let g = vec![Tensor::zeros(&[3])];
        for _ in 0..5 {
            opt.step(&mut p, &g).unwrap();
        }
        assert_eq!(p[0].data(), &[1.0, -2.0, 0.5]);
        assert_eq!(opt.state.step, 5);
    }

    #[test]
    fn shape_mismatch_is_error() {
        let mut opt = AdamW::<f64>::new(0.1, 0.0);
        let mut p = one(1.0);
        let g = vec![Tensor::zeros(&[2])];
        assert!(opt.step(&mut p, &g).is_err());
    }
}
