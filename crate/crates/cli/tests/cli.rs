use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sev_forge::tabular::{encode_onehot, load_dataset, save_dataset, Schema};

const SMALL: &str = r#"
config_version = 1
seed = 7

[data]
profile = "motorcyclist"
class_counts = [150, 300, 90]

[select]
top_k = 12
forest = { n_trees = 20, max_depth = 4, min_samples_leaf = 5, feature_subsample = 0.3, learning_rate = 0.1, seed = 0 }
gbdt = { n_trees = 10, max_depth = 3, min_samples_leaf = 5, feature_subsample = 1.0, learning_rate = 0.1, seed = 0, bootstrap = false }

[hyper.armnet]
epochs = 3
hidden_dim = 32
num_layers = 1

[hyper.mambanet]
epochs = 3
hidden_dims = [32, 16]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sev-forge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, body).unwrap();
    p
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pipeline_rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&["pipeline", "--config", s(&cfg), "--out", s(&a)]);
    ok(&["pipeline", "--config", s(&cfg), "--out", s(&b)]);
    let (ta, mut tb) = (tree(&a), tree(&b));
    // the resolved config records its own out_dir
    let key = PathBuf::from("config.resolved.toml");
    assert!(ta.contains_key(&key));
    tb.insert(key.clone(), ta[&key].clone());
    assert_eq!(ta.keys().collect::<Vec<_>>(), tb.keys().collect::<Vec<_>>());
    for (k, v) in &ta {
        assert!(tb[k] == *v, "{} differs", k.display());
    }
    for f in ["importance.json", "resampled.csv", "splits/test.csv", "armnet/checkpoint.json", "reports/mambanet/report.md", "reports/summary.md"] {
        assert!(ta.contains_key(Path::new(f)), "missing {f}");
    }
}

#[test]
fn subcommands_reproduce_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let (p, m) = (tmp.path().join("p"), tmp.path().join("m"));
    ok(&["pipeline", "--config", s(&cfg), "--out", s(&p)]);
    let c = ["--config", s(&cfg), "--out", s(&m)];
    let j = |f: &str| m.join(f).to_string_lossy().into_owned();
    ok(&[&["synth"][..], &c].concat());
    ok(&[&["select-features", "--input", &j("data.csv"), "--schema", &j("schema.json")][..], &c].concat());
    ok(&[&["resample", "--input", &j("selected.csv"), "--schema", &j("selected_schema.json")][..], &c].concat());
    ok(&[&["train", "--input", &j("resampled.csv"), "--schema", &j("selected_schema.json")][..], &c].concat());
    for model in ["armnet", "mambanet"] {
        let ckpt = j(&format!("{model}/checkpoint.json"));
        let args = ["evaluate", "--input", &j("splits/test.csv"), "--schema", &j("selected_schema.json"), "--checkpoint", &ckpt, "--stats", &j("resample_stats.json")];
        ok(&[&args[..], &c].concat());
    }
    let (tp, tm) = (tree(&p), tree(&m));
    for (k, v) in &tm {
        assert!(tp.get(k) == Some(v), "{} differs from the pipeline's", k.display());
    }
    assert!(tm.contains_key(Path::new("reports/armnet/report.json")));
}

#[test]
fn evaluate_rejects_schema_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("o");
    ok(&["pipeline", "--config", s(&cfg), "--out", s(&out)]);
    // drop one field: a different schema with a self-consistent CSV
    let schema = Schema::load(&out.join("selected_schema.json")).unwrap();
    let names: Vec<&str> = schema.field_names().into_iter().skip(1).collect();
    let sub = schema.project(&names).unwrap();
    let ds = load_dataset(&out.join("selected.csv"), &schema).unwrap().project(&sub).unwrap();
    assert!(encode_onehot(&ds).is_ok());
    let (csv, sj) = (tmp.path().join("other.csv"), tmp.path().join("other_schema.json"));
    save_dataset(&ds, &csv).unwrap();
    std::fs::write(&sj, sub.to_json_string().unwrap()).unwrap();
    let ckpt = out.join("armnet/checkpoint.json");
    let o = run(&["evaluate", "--input", s(&csv), "--schema", s(&sj), "--checkpoint", s(&ckpt), "--out", s(&tmp.path().join("e"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error kind=data msg=\""), "{err}");
    assert!(err.contains("schema mismatch"), "{err}");
}

#[test]
fn tune_writes_hundred_entry_leaderboard() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL.replace("epochs = 3", "epochs = 1").replace("[150, 300, 90]", "[40, 80, 30]");
    let cfg = write_config(tmp.path(), &body);
    let out = tmp.path().join("t");
    let c = ["--config", s(&cfg), "--out", s(&out)];
    ok(&[&["synth"][..], &c].concat());
    let data = out.join("data.csv");
    let schema = out.join("schema.json");
    ok(&[&["tune", "--model", "mambanet", "--draws", "100", "--input", s(&data), "--schema", s(&schema)][..], &c].concat());
    let lb: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("mambanet/leaderboard.json")).unwrap()).unwrap();
    let entries = lb["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 100);
    let losses: Vec<f64> = entries.iter().filter_map(|e| e["val_loss"].as_f64()).collect();
    assert!(losses.windows(2).all(|w| w[0] <= w[1]));
    assert!(out.join("mambanet/checkpoint.json").exists());
}

#[test]
fn error_classes_map_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(tmp.path(), "config_version = 9\n");
    let o = run(&["pipeline", "--config", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=config msg="));

    let missing = run(&["pipeline", "--config", s(&tmp.path().join("nope.toml"))]);
    assert_eq!(missing.status.code(), Some(2));

    let both = write_config(tmp.path(), "config_version = 1\n[data]\nprofile = \"motorcyclist\"\ncsv = \"x.csv\"\nschema = \"s.json\"\n");
    assert_eq!(run(&["pipeline", "--config", s(&both)]).status.code(), Some(2));

    let o = run(&["resample", "--input", s(&tmp.path().join("none.csv")), "--schema", s(&tmp.path().join("none.json"))]);
    assert_eq!(o.status.code(), Some(3));

    let o = bin().env("SEV_FORGE_THREADS", "lots").args(["synth", "--out", s(&tmp.path().join("x"))]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_honours_seed_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    ok(&["synth", "--seed", "1", "--out", s(&a)]);
    ok(&["synth", "--seed", "1", "--out", s(&b)]);
    ok(&["synth", "--seed", "2", "--out", s(&c)]);
    let read = |d: &Path| std::fs::read(d.join("data.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let rows = std::fs::read_to_string(a.join("data.csv")).unwrap().lines().count();
    assert_eq!(rows, 10_726 + 1);
}
