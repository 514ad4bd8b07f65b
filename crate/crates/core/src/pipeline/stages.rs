use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sev_autodiff::Scalar;

use super::config::{Dtype, PipelineConfig};
use crate::error::{Error, Result};
use crate::importance::{fit_forest_importance, fit_gbdt_importance, ranking_rows, select_common_topk, RankingRow, TreeParams};
use crate::models::{load_checkpoint, predict, save_checkpoint, ModelKind, ModelMeta, TrainingSummary, META_VERSION};
use crate::report::{
    classification_metrics, confusion_matrix, drift_diagnostics, emit_report, render_summary, write_file, DriftReport,
    EvalReport, ReportFormat, REPORT_VERSION,
};
use crate::resample::{smoteenn, ResampleParams, ResampleStats};
use crate::tabular::{
    encode_onehot, is_encoded_header, load_dataset, read_csv_header, read_encoded_csv, save_dataset, split_indices,
    synth_generate, write_encoded_csv, Dataset, EncodedMatrix, GeneratorProfile, Schema, SplitSpec,
};
use crate::train::{random_search, train_model, RunSpec, TrainHistory};

/// File names under one output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn data_csv(&self) -> PathBuf {
        self.root.join("data.csv")
    }
    pub fn schema_json(&self) -> PathBuf {
        self.root.join("schema.json")
    }
    pub fn importance_json(&self) -> PathBuf {
        self.root.join("importance.json")
    }
    pub fn selected_schema(&self) -> PathBuf {
        self.root.join("selected_schema.json")
    }
    pub fn selected_csv(&self) -> PathBuf {
        self.root.join("selected.csv")
    }
    pub fn resampled_csv(&self) -> PathBuf {
        self.root.join("resampled.csv")
    }
    pub fn resample_stats(&self) -> PathBuf {
        self.root.join("resample_stats.json")
    }
    pub fn drift_json(&self) -> PathBuf {
        self.root.join("drift.json")
    }
    pub fn split_csv(&self, part: &str) -> PathBuf {
        self.root.join("splits").join(format!("{part}.csv"))
    }
    pub fn checkpoint(&self, kind: ModelKind) -> PathBuf {
        self.root.join(kind.slug()).join("checkpoint.json")
    }
    pub fn reports(&self, kind: ModelKind) -> PathBuf {
        self.root.join("reports").join(kind.slug())
    }
    pub fn summary_md(&self) -> PathBuf {
        self.root.join("reports").join("summary.md")
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => std::fs::create_dir_all(d).map_err(|e| Error::io(d, e)),
        _ => Ok(()),
    }
}

fn put(path: &Path, contents: &str) -> Result<()> {
    ensure_parent(path)?;
    write_file(path, contents)
}

fn put_json<S: Serialize>(path: &Path, v: &S) -> Result<()> {
    put(path, &(serde_json::to_string_pretty(v)? + "\n"))
}

pub fn save_encoded(m: &EncodedMatrix, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_encoded_csv(m, BufWriter::new(f))
}

/// Reads a CSV in either the categorical or the encoded layout and returns the encoded matrix.
pub fn load_matrix(path: &Path, schema: &Schema) -> Result<EncodedMatrix> {
    if is_encoded_header(&read_csv_header(path)?) {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        read_encoded_csv(std::io::BufReader::new(f), schema)
    } else {
        encode_onehot(&load_dataset(path, schema)?)
    }
}

pub fn load_profile(spec: &str, counts: Option<[usize; 3]>) -> Result<GeneratorProfile> {
    let p = if spec == "motorcyclist" {
        GeneratorProfile::motorcyclist()
    } else {
        GeneratorProfile::load(Path::new(spec))?
    };
    Ok(match counts {
        Some(c) => p.with_class_counts(c),
        None => p,
    })
}

/// Generates `data.csv` and `schema.json`.
pub fn run_synth(profile: &GeneratorProfile, seed: u64, layout: &Layout) -> Result<Dataset> {
    let ds = synth_generate(profile, seed);
    ensure_parent(&layout.data_csv())?;
    save_dataset(&ds, &layout.data_csv())?;
    put(&layout.schema_json(), &ds.schema().to_json_string()?)?;
    Ok(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceFile {
    pub top_k: usize,
    pub forest: TreeParams,
    pub gbdt: TreeParams,
    pub rows: Vec<RankingRow>,
    /// Selected fields in selection order.
    pub selected: Vec<String>,
}

/// Dual ranking and top-k intersection; writes `importance.json`,
/// `selected_schema.json` and `selected.csv`.
pub fn run_select(ds: &Dataset, top_k: usize, forest: &TreeParams, gbdt: &TreeParams, layout: &Layout) -> Result<Dataset> {
    let x = encode_onehot(ds)?;
    let rf = fit_forest_importance(&x, x.labels(), forest)?;
    let gb = fit_gbdt_importance(&x, x.labels(), gbdt)?;
    let k = top_k.min(ds.schema().num_fields());
    let selected = select_common_topk(&rf, &gb, k)?;
    if selected.is_empty() {
        return Err(Error::Data(format!("no field ranks in the top {k} of both rankers")));
    }
    let names: Vec<&str> = selected.iter().map(|&f| ds.schema().field(f).name.as_str()).collect();
    let sub = ds.schema().project(&names)?;
    let projected = ds.project(&sub)?;
    let file = ImportanceFile {
        top_k: k,
        forest: *forest,
        gbdt: *gbdt,
        rows: ranking_rows(&rf, &gb, &selected),
        selected: names.iter().map(|s| s.to_string()).collect(),
    };
    put_json(&layout.importance_json(), &file)?;
    put(&layout.selected_schema(), &sub.to_json_string()?)?;
    save_dataset(&projected, &layout.selected_csv())?;
    Ok(projected)
}

/// SMOTEENN plus drift diagnostics; writes `resampled.csv`, `resample_stats.json`, `drift.json`.
pub fn run_resample(ds: &Dataset, p: &ResampleParams, layout: &Layout) -> Result<(EncodedMatrix, ResampleStats, DriftReport)> {
    let before = encode_onehot(ds)?;
    let (after, stats) = smoteenn(&before, p)?;
    let drift = drift_diagnostics(&before, &after)?;
    save_encoded(&after, &layout.resampled_csv())?;
    put_json(&layout.resample_stats(), &stats)?;
    put_json(&layout.drift_json(), &drift)?;
    Ok((after, stats, drift))
}

pub struct Splits {
    pub train: EncodedMatrix,
    pub val: EncodedMatrix,
    pub test: EncodedMatrix,
}

pub fn run_split(m: &EncodedMatrix, spec: &SplitSpec, layout: &Layout) -> Result<Splits> {
    let idx = split_indices(m.labels(), spec)?;
    let s = Splits {
        train: m.select_rows(&idx.train),
        val: m.select_rows(&idx.val),
        test: m.select_rows(&idx.test),
    };
    save_encoded(&s.train, &layout.split_csv("train"))?;
    save_encoded(&s.val, &layout.split_csv("val"))?;
    save_encoded(&s.test, &layout.split_csv("test"))?;
    Ok(s)
}

/// Trains one model (or runs an n-draw search when `draws > 0`) and writes its
/// checkpoint, sidecar, `history.csv` and, for searches, `leaderboard.json`.
pub fn run_train<T: Scalar>(
    spec: &RunSpec,
    draws: usize,
    space: &crate::train::SearchSpace,
    splits: &Splits,
    dataset_samples: [usize; 3],
    checkpoint: &Path,
) -> Result<ModelMeta> {
    let dir = checkpoint.parent().unwrap_or(Path::new("")).to_path_buf();
    let (spec, model, history, best_epoch, early_stopped, weights) = if draws > 0 {
        let s = random_search::<T>(space, draws, spec, &splits.train, &splits.val)?;
        put(&dir.join("leaderboard.json"), &s.leaderboard.to_json_string()?)?;
        (s.best, s.model, s.history, s.best_epoch, s.early_stopped, s.class_weights)
    } else {
        let o = train_model::<T>(spec, &splits.train, &splits.val)?;
        (spec.clone(), o.model, o.history, o.best_epoch, o.early_stopped, o.class_weights)
    };
    let best = history.rows[best_epoch - 1];
    let schema = splits.train.schema();
    let meta = ModelMeta {
        meta_version: META_VERSION,
        model: spec.model,
        dtype: T::DTYPE.into(),
        hyper: model.hyper().clone(),
        field_sizes: schema.fields().iter().map(|f| f.levels.len()).collect(),
        schema_hash: schema.hash(),
        seed: spec.seed,
        training: Some(TrainingSummary {
            epochs_run: history.len(),
            early_stopped,
            best_epoch,
            best_val_loss: best.val_loss,
            best_val_acc: best.val_acc,
            class_weights: weights,
            train_samples: splits.train.class_counts(),
            dataset_samples,
        }),
    };
    save_checkpoint(&model, &meta, checkpoint)?;
    put(&dir.join("history.csv"), &history.to_csv_string())?;
    Ok(meta)
}

fn read_history(path: &Path) -> Result<TrainHistory> {
    if !path.exists() {
        return Ok(TrainHistory::default());
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    TrainHistory::read_csv(f)
}

/// Scores a checkpoint on `test` and writes the requested report files.
pub fn run_evaluate<T: Scalar>(
    checkpoint: &Path,
    test: &EncodedMatrix,
    resample: Option<ResampleStats>,
    drift: Option<DriftReport>,
    formats: &[ReportFormat],
    out_dir: &Path,
) -> Result<EvalReport> {
    let (model, meta) = load_checkpoint::<T>(checkpoint)?;
    let hash = test.schema().hash();
    if hash != meta.schema_hash {
        return Err(Error::SchemaMismatch(format!(
            "checkpoint was trained on schema {} but the data has schema {hash}",
            meta.schema_hash
        )));
    }
    let pred = predict(&model, test)?;
    let cm = confusion_matrix(test.labels(), &pred.labels)?;
    let metrics = classification_metrics(&cm, test.schema().label_levels())?;
    let history = read_history(&checkpoint.with_file_name("history.csv"))?;
    let (epochs, early_stopped, samples) = match &meta.training {
        Some(t) => (t.epochs_run, t.early_stopped, t.dataset_samples),
        None => (history.len(), false, test.class_counts()),
    };
    let report = EvalReport {
        report_version: REPORT_VERSION,
        model: meta.model.display_name().into(),
        metrics,
        confusion: cm,
        epochs,
        early_stopped,
        samples,
        history,
        resample,
        drift,
    };
    emit_report(&report, out_dir, formats)?;
    Ok(report)
}

pub fn read_json<D: serde::de::DeserializeOwned>(path: &Path) -> Result<D> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&s)?)
}

/// Every stage in order: source, select, resample, split, train, evaluate, summary.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<EvalReport>> {
    match cfg.dtype {
        Dtype::F64 => pipeline_as::<f64>(cfg),
        Dtype::F32 => pipeline_as::<f32>(cfg),
    }
}

fn pipeline_as<T: Scalar>(cfg: &PipelineConfig) -> Result<Vec<EvalReport>> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.out_dir);
    std::fs::create_dir_all(&layout.root).map_err(|e| Error::io(&layout.root, e))?;
    put(&layout.root.join("config.resolved.toml"), &cfg.to_toml_string()?)?;
    let raw = match (&cfg.data.profile, &cfg.data.csv, &cfg.data.schema) {
        (Some(p), _, _) => run_synth(&load_profile(p, cfg.data.class_counts)?, cfg.seed, &layout)?,
        (None, Some(csv), Some(schema)) => load_dataset(csv, &Schema::load(schema)?)?,
        _ => unreachable!("validated"),
    };
    let selected = run_select(&raw, cfg.select.top_k, &cfg.forest_params(), &cfg.gbdt_params(), &layout)?;
    let (resampled, stats, drift) = run_resample(&selected, &cfg.resample_params(), &layout)?;
    let splits = run_split(&resampled, &cfg.split_spec(), &layout)?;
    let mut reports = Vec::new();
    for &kind in &cfg.train.models {
        let ckpt = layout.checkpoint(kind);
        run_train::<T>(&cfg.run_spec(kind), cfg.tune.draws, &cfg.tune.space, &splits, resampled.class_counts(), &ckpt)?;
        reports.push(run_evaluate::<T>(
            &ckpt,
            &splits.test,
            Some(stats.clone()),
            Some(drift.clone()),
            &cfg.formats,
            &layout.reports(kind),
        )?);
    }
    put(&layout.summary_md(), &render_summary(&reports))?;
    Ok(reports)
}
