use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sev_forge::models::{meta_path_for, ModelKind, ModelMeta};
use sev_forge::pipeline::*;
use sev_forge::report::render_summary;
use sev_forge::resample::ResampleStats;
use sev_forge::tabular::{load_dataset, Schema};
use sev_forge::{Error, Result};

#[derive(Parser)]
#[command(name = "sev-forge", version, about = "Crash-severity classification pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML pipeline config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (artifact layout root).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    schema: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset from a profile (default: the bundled fixture).
    Synth {
        #[command(flatten)]
        common: Common,
        /// Profile JSON path or "motorcyclist".
        #[arg(long)]
        input: Option<String>,
    },
    /// Rank fields with both tree ensembles and keep the common top-k.
    SelectFeatures {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// SMOTEENN resampling with drift diagnostics.
    Resample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Split, then train the configured model(s) once.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<String>,
    },
    /// Split, then random-search hyperparameters.
    Tune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: Option<String>,
        /// Number of draws (config value, or 100).
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Score a checkpoint on a CSV and write report files.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// resample_stats.json to embed (drift.json beside it is picked up too).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// All stages in order.
    Pipeline {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(c: &Common) -> Result<PipelineConfig> {
    let mut cfg = match &c.config {
        Some(p) => PipelineConfig::load(p).map_err(|e| match e {
            Error::Io { .. } | Error::Json(_) => Error::Config(e.to_string()),
            e => e,
        })?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn models(cfg: &PipelineConfig, flag: &Option<String>) -> Result<Vec<ModelKind>> {
    match flag {
        Some(m) => Ok(vec![ModelKind::parse(m)?]),
        None => Ok(cfg.train.models.clone()),
    }
}

fn train_cmd(cfg: &PipelineConfig, data: &DataArgs, kinds: &[ModelKind], draws: usize) -> Result<()> {
    let schema = Schema::load(&data.schema)?;
    let m = load_matrix(&data.input, &schema)?;
    let layout = Layout::new(&cfg.out_dir);
    let splits = run_split(&m, &cfg.split_spec(), &layout)?;
    for &kind in kinds {
        let spec = cfg.run_spec(kind);
        spec.validate()?;
        let ckpt = layout.checkpoint(kind);
        match cfg.dtype {
            Dtype::F64 => run_train::<f64>(&spec, draws, &cfg.tune.space, &splits, m.class_counts(), &ckpt)?,
            Dtype::F32 => run_train::<f32>(&spec, draws, &cfg.tune.space, &splits, m.class_counts(), &ckpt)?,
        };
        println!("{}", ckpt.display());
    }
    Ok(())
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Synth { common, input } => {
            let cfg = load_config(&common)?;
            let profile = input.or(cfg.data.profile.clone()).unwrap_or_else(|| "motorcyclist".into());
            let layout = Layout::new(&cfg.out_dir);
            run_synth(&load_profile(&profile, cfg.data.class_counts)?, cfg.seed, &layout)?;
            println!("{}", layout.data_csv().display());
        }
        Cmd::SelectFeatures { common, data } => {
            let cfg = load_config(&common)?;
            let ds = load_dataset(&data.input, &Schema::load(&data.schema)?)?;
            let layout = Layout::new(&cfg.out_dir);
            run_select(&ds, cfg.select.top_k, &cfg.forest_params(), &cfg.gbdt_params(), &layout)?;
            println!("{}", layout.importance_json().display());
        }
        Cmd::Resample { common, data } => {
            let cfg = load_config(&common)?;
            cfg.resample_params().validate()?;
            let ds = load_dataset(&data.input, &Schema::load(&data.schema)?)?;
            let layout = Layout::new(&cfg.out_dir);
            run_resample(&ds, &cfg.resample_params(), &layout)?;
            println!("{}", layout.resampled_csv().display());
        }
        Cmd::Train { common, data, model } => {
            let cfg = load_config(&common)?;
            train_cmd(&cfg, &data, &models(&cfg, &model)?, 0)?;
        }
        Cmd::Tune {
            common,
            data,
            model,
            draws,
        } => {
            let cfg = load_config(&common)?;
            let n = draws.unwrap_or(if cfg.tune.draws > 0 { cfg.tune.draws } else { 100 });
            if n == 0 {
                return Err(Error::Config("--draws must be positive".into()));
            }
            cfg.tune.space.validate()?;
            train_cmd(&cfg, &data, &models(&cfg, &model)?, n)?;
        }
        Cmd::Evaluate {
            common,
            data,
            checkpoint,
            stats,
        } => {
            let cfg = load_config(&common)?;
            let test = load_matrix(&data.input, &Schema::load(&data.schema)?)?;
            let resample: Option<ResampleStats> = stats.as_deref().map(read_json).transpose()?;
            let drift = match stats.as_deref().map(|s| s.with_file_name("drift.json")) {
                Some(p) if p.exists() => Some(read_json(&p)?),
                _ => None,
            };
            let meta: ModelMeta = read_json(&meta_path_for(&checkpoint))?;
            let out = Layout::new(&cfg.out_dir).reports(meta.model);
            let report = match meta.dtype.as_str() {
                "f32" => run_evaluate::<f32>(&checkpoint, &test, resample, drift, &cfg.formats, &out)?,
                _ => run_evaluate::<f64>(&checkpoint, &test, resample, drift, &cfg.formats, &out)?,
            };
            print!("{}", render_summary(std::slice::from_ref(&report)));
        }
        Cmd::Pipeline { common } => {
            let cfg = load_config(&common)?;
            let reports = run_pipeline(&cfg)?;
            print!("{}", render_summary(&reports));
        }
    }
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("SEV_FORGE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("SEV_FORGE_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn report_error(e: &Error) -> ExitCode {
    let class = e.class();
    let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    eprintln!("error kind={} msg=\"{msg}\"", class.as_str());
    ExitCode::from(class.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match init_threads().and_then(|_| run(cli.cmd)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}
