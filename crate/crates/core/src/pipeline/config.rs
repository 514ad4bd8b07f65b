use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::importance::TreeParams;
use crate::models::{HyperParams, ModelKind};
use crate::report::{ReportFormat, ALL_FORMATS};
use crate::resample::ResampleParams;
use crate::seed::derive_seed;
use crate::tabular::SplitSpec;
use crate::train::{RunSpec, SearchSpace};

pub const CONFIG_VERSION: u32 = 1;

/// Where the raw data comes from. Exactly one of `csv` / `profile`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    /// Categorical CSV (needs `schema`).
    pub csv: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    /// Generator profile JSON, or `"motorcyclist"` for the bundled fixture.
    pub profile: Option<String>,
    /// Overrides the profile's per-class row counts.
    pub class_counts: Option<[usize; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectConfig {
    pub top_k: usize,
    pub forest: TreeParams,
    pub gbdt: TreeParams,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            top_k: 12,
            forest: TreeParams::forest_default(),
            gbdt: TreeParams::gbdt_default(),
        }
    }
}

/// Loop settings shared by every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub models: Vec<ModelKind>,
    pub patience: usize,
    pub min_delta: f64,
    pub class_weighting: bool,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub min_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let r = RunSpec::default();
        Self {
            models: ModelKind::ALL.to_vec(),
            patience: r.patience,
            min_delta: r.min_delta,
            class_weighting: r.class_weighting,
            plateau_patience: r.plateau_patience,
            plateau_factor: r.plateau_factor,
            min_lr: r.min_lr,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// 0 trains the configured hyperparameters once; n > 0 runs an n-draw search.
    pub draws: usize,
    pub space: SearchSpace,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub config_version: u32,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub dtype: Dtype,
    pub formats: Vec<ReportFormat>,
    pub data: DataSource,
    pub select: SelectConfig,
    pub resample: ResampleParams,
    pub split: SplitSpec,
    pub train: TrainConfig,
    /// Per-model hyperparameters keyed by `armnet` / `mambanet`.
    pub hyper: BTreeMap<ModelKind, HyperParams>,
    pub tune: TuneConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            config_version: CONFIG_VERSION,
            seed: 0,
            out_dir: PathBuf::from("sev-forge-out"),
            dtype: Dtype::F64,
            formats: ALL_FORMATS.to_vec(),
            data: DataSource {
                profile: Some("motorcyclist".into()),
                ..DataSource::default()
            },
            select: SelectConfig::default(),
            resample: ResampleParams::default(),
            split: SplitSpec::default(),
            train: TrainConfig::default(),
            hyper: BTreeMap::new(),
            tune: TuneConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config_version {}", cfg.config_version)));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&s)?;
        // relative data paths are relative to the config file
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.csv, &mut cfg.data.schema].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = cfg.data.profile.as_mut().filter(|p| *p != "motorcyclist" && Path::new(p.as_str()).is_relative()) {
            *p = base.join(&*p).to_string_lossy().into_owned();
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data.csv, &self.data.profile) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config("data needs exactly one of `csv` and `profile`".into()))
            }
            (Some(_), None) if self.data.schema.is_none() => {
                return Err(Error::Config("a csv data source needs `schema`".into()))
            }
            (Some(_), None) if self.data.class_counts.is_some() => {
                return Err(Error::Config("`class_counts` applies only to a profile source".into()))
            }
            _ => {}
        }
        if let Some(csv) = &self.data.csv {
            let out = std::path::absolute(&self.out_dir).map_err(|e| Error::io(&self.out_dir, e))?;
            let input = std::path::absolute(csv).map_err(|e| Error::io(csv, e))?;
            if input.starts_with(&out) {
                return Err(Error::Config("output directory must not contain the input CSV".into()));
            }
        }
        if self.train.models.is_empty() {
            return Err(Error::Config("train.models is empty".into()));
        }
        if self.formats.is_empty() {
            return Err(Error::Config("no report formats requested".into()));
        }
        self.select.forest.validate()?;
        self.select.gbdt.validate()?;
        if self.select.top_k == 0 {
            return Err(Error::Config("select.top_k must be positive".into()));
        }
        for kind in &self.train.models {
            self.run_spec(*kind).validate()?;
        }
        if self.tune.draws > 0 {
            self.tune.space.validate()?;
        }
        Ok(())
    }

    pub fn hyper_for(&self, kind: ModelKind) -> HyperParams {
        self.hyper.get(&kind).cloned().unwrap_or_default()
    }

    pub fn forest_params(&self) -> TreeParams {
        TreeParams {
            seed: derive_seed(self.seed, "importance-forest", 0),
            ..self.select.forest
        }
    }

    pub fn gbdt_params(&self) -> TreeParams {
        TreeParams {
            seed: derive_seed(self.seed, "importance-gbdt", 0),
            ..self.select.gbdt
        }
    }

    pub fn resample_params(&self) -> ResampleParams {
        ResampleParams {
            seed: derive_seed(self.seed, "resample", 0),
            ..self.resample
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            seed: derive_seed(self.seed, "split", 0),
            ..self.split
        }
    }

    /// Training spec for `kind`; every stage seed is derived from the top-level seed.
    pub fn run_spec(&self, kind: ModelKind) -> RunSpec {
        let t = &self.train;
        RunSpec {
            model: kind,
            hyper: self.hyper_for(kind),
            split: self.split_spec(),
            resample: self.resample_params(),
            patience: t.patience,
            min_delta: t.min_delta,
            class_weighting: t.class_weighting,
            plateau_patience: t.plateau_patience,
            plateau_factor: t.plateau_factor,
            min_lr: t.min_lr,
            seed: derive_seed(self.seed, "train", kind as u64),
        }
    }
}
