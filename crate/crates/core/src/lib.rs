//! Crash-severity classification pipeline for categorical tabular data.
//!
//! Stages, in order: one-hot encoding, dual tree-ensemble feature ranking,
//! SMOTE + ENN rebalancing, ARM-Net-style and MambaNet-style classifiers
//! trained with AdamW, and evaluation reports.

pub mod error;
pub mod importance;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod resample;
pub mod seed;
pub mod tabular;
pub mod train;

pub use error::{Error, ErrorClass, Result};
