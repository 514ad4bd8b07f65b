use rand::Rng;
use rand_chacha::ChaCha8Rng;
use sev_autodiff::{ParamStore, Scalar, Tensor};

/// Draws parameters in registration order from one seeded stream.
pub(crate) struct Init<'a, T> {
    pub store: &'a mut ParamStore<T>,
    pub rng: ChaCha8Rng,
}

impl<T: Scalar> Init<'_, T> {
    pub fn uniform(&mut self, name: &str, shape: &[usize], bound: f64) -> usize {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = (0..n).map(|_| self.rng.random_range(-bound..bound)).collect();
        self.store.insert(name, Tensor::from_f64(shape, &data).expect("shape matches"))
    }

    pub fn fill(&mut self, name: &str, shape: &[usize], v: f64) -> usize {
        self.store.insert(name, Tensor::filled(shape, T::from_f64_lossy(v)))
    }

    /// Fan-in scaled weight `fan_in × fan_out` plus bias.
    pub fn dense(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Dense {
        let b = 1.0 / (fan_in as f64).sqrt();
        Dense {
            w: self.uniform(&format!("{name}.w"), &[fan_in, fan_out], b),
            b: self.uniform(&format!("{name}.b"), &[fan_out], b),
        }
    }

    pub fn norm(&mut self, name: &str, width: usize) -> Norm {
        Norm {
            gamma: self.fill(&format!("{name}.gamma"), &[width], 1.0),
            beta: self.fill(&format!("{name}.beta"), &[width], 0.0),
        }
    }
}

/// Parameter positions of an affine layer.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dense {
    pub w: usize,
    pub b: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Norm {
    pub gamma: usize,
    pub beta: usize,
}
