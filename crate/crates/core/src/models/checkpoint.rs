use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sev_autodiff::{ParamStore, Scalar};

use super::hyper::{HyperParams, ModelKind};
use super::Classifier;
use crate::error::{Error, Result};
use crate::tabular::NUM_CLASSES;

pub const META_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub epochs_run: usize,
    pub early_stopped: bool,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_val_acc: f64,
    pub class_weights: Option<Vec<f64>>,
    pub train_samples: [usize; NUM_CLASSES],
    /// Class counts of the whole modeling dataset (after resampling).
    pub dataset_samples: [usize; NUM_CLASSES],
}

/// Sidecar written next to every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub meta_version: u32,
    pub model: ModelKind,
    pub dtype: String,
    pub hyper: HyperParams,
    pub field_sizes: Vec<usize>,
    pub schema_hash: String,
    pub seed: u64,
    pub training: Option<TrainingSummary>,
}

/// `checkpoint.json` → `checkpoint.meta.json`.
pub fn meta_path_for(checkpoint: &Path) -> PathBuf {
    let stem = checkpoint.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint");
    checkpoint.with_file_name(format!("{stem}.meta.json"))
}

pub fn save_checkpoint<T: Scalar>(model: &Classifier<T>, meta: &ModelMeta, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let body = model.params().to_json_string()?;
    std::fs::write(path, body + "\n").map_err(|e| Error::io(path, e))?;
    let mp = meta_path_for(path);
    std::fs::write(&mp, serde_json::to_string_pretty(meta)? + "\n").map_err(|e| Error::io(&mp, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<(Classifier<T>, ModelMeta)> {
    let mp = meta_path_for(path);
    let meta_text = std::fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
    let meta: ModelMeta = serde_json::from_str(&meta_text)?;
    if meta.meta_version != META_VERSION {
        return Err(Error::Config(format!("unsupported meta_version {}", meta.meta_version)));
    }
    if meta.dtype != T::DTYPE {
        return Err(Error::Config(format!("checkpoint dtype {} but {} requested", meta.dtype, T::DTYPE)));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stored = ParamStore::<T>::from_json_str(&text)?;
    let mut model = Classifier::from_field_sizes(meta.model, &meta.hyper, &meta.field_sizes, meta.seed)?;
    model.params_mut().load_from(&stored)?;
    Ok((model, meta))
}
