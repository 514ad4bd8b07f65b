//! Config-driven stages, each writing its artifacts under one output directory.

mod config;
mod stages;

pub use config::{DataSource, Dtype, PipelineConfig, SelectConfig, TrainConfig, TuneConfig, CONFIG_VERSION};
pub use stages::*;
