//! Reverse-mode automatic differentiation over dense row-major tensors.
//!
//! The kernel set is deliberately small: exactly what the tabular classifiers
//! and their training loop use. Everything is generic over [`Scalar`]
//! (`f32`/`f64`); the `*64`/`*32` aliases below cover the common cases.

pub mod error;
pub mod gradcheck;
pub mod gradsuite;
pub mod graph;
pub mod kernels;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod schedule;
pub mod tensor;

pub use error::{AutodiffError, Result};
pub use graph::{DropoutMode, Gradients, Graph, NodeId, OpKind};
pub use optim::{Adam, AdamW, OptState};
pub use params::ParamStore;
pub use scalar::Scalar;
pub use schedule::PlateauState;
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Graph64 = Graph<f64>;
pub type Graph32 = Graph<f32>;
pub type ParamStore64 = ParamStore<f64>;
pub type ParamStore32 = ParamStore<f32>;
