use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sev_forge::importance::*;
use sev_forge::tabular::*;

fn schema(n_fields: usize, levels: usize) -> Schema {
    let names: Vec<String> = (0..levels).map(|l| format!("l{l}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Schema::with_fields((0..n_fields).map(|f| Field::new(format!("F{f}"), &refs)).collect()).unwrap()
}

fn matrix(schema: &Schema, rows: Vec<Row>) -> EncodedMatrix {
    encode_onehot(&Dataset::new(schema.clone(), rows).unwrap()).unwrap()
}

fn small(n_trees: usize, depth: usize) -> TreeParams {
    TreeParams {
        n_trees,
        max_depth: depth,
        min_samples_leaf: 1,
        ..TreeParams::forest_default()
    }
}

/// Field 1 equals the label (two classes); fields 0 and 2 are constant.
fn separable() -> EncodedMatrix {
    let s = schema(3, 2);
    let rows = (0..40).map(|i| Row { values: vec![0, i % 2, 0], label: i % 2 }).collect();
    matrix(&s, rows)
}

fn check_normalized(r: &ImportanceRanking) {
    assert!(r.scores().iter().all(|&s| s >= 0.0));
    assert!((r.scores().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let mut o = r.order().to_vec();
    o.sort_unstable();
    assert_eq!(o, (0..r.scores().len()).collect::<Vec<_>>());
}

#[test]
fn perfectly_separating_field_gets_everything() {
    let x = separable();
    let f = fit_forest_importance(&x, x.labels(), &small(20, 4)).unwrap();
    let g = fit_gbdt_importance(&x, x.labels(), &TreeParams { n_trees: 10, ..TreeParams::gbdt_default() }).unwrap();
    for r in [&f, &g] {
        check_normalized(r);
        assert!((r.scores()[1] - 1.0).abs() < 1e-12, "{:?}", r.scores());
        assert_eq!(r.order()[0], 1);
    }
}

#[test]
fn pure_noise_no_field_dominates() {
    let s = schema(10, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let rows = (0..600)
        .map(|_| Row {
            values: (0..10).map(|_| rng.random_range(0..3)).collect(),
            label: rng.random_range(0..3),
        })
        .collect();
    let x = matrix(&s, rows);
    let p = TreeParams { max_depth: 1, n_trees: 300, ..TreeParams::forest_default() };
    let r = fit_forest_importance(&x, x.labels(), &p).unwrap();
    check_normalized(&r);
    let max = r.scores().iter().copied().fold(0.0, f64::max);
    assert!(max < 0.5, "{:?}", r.scores());
}

#[test]
fn same_inputs_same_scores() {
    let x = noisy_informative(300, 5);
    let p = TreeParams { n_trees: 30, ..TreeParams::forest_default() };
    let a = fit_forest_importance(&x, x.labels(), &p).unwrap();
    let b = fit_forest_importance(&x, x.labels(), &p).unwrap();
    assert_eq!(a, b);
    let q = TreeParams { n_trees: 20, ..TreeParams::gbdt_default() };
    assert_eq!(
        fit_gbdt_importance(&x, x.labels(), &q).unwrap(),
        fit_gbdt_importance(&x, x.labels(), &q).unwrap()
    );
}

/// Field 0 predicts the label 70% of the time, the rest are noise.
fn noisy_informative(n: usize, seed: u64) -> EncodedMatrix {
    let s = schema(4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n)
        .map(|_| {
            let label = rng.random_range(0..3);
            let f0 = if rng.random::<f64>() < 0.7 { label } else { rng.random_range(0..3) };
            Row {
                values: vec![f0, rng.random_range(0..3), rng.random_range(0..3), rng.random_range(0..3)],
                label,
            }
        })
        .collect();
    matrix(&s, rows)
}

#[test]
fn duplicated_field_conserves_gain() {
    let base = noisy_informative(500, 21);
    let d = base.decode();
    let s2 = Schema::with_fields(vec![
        d.schema().field(0).clone(),
        Field { name: "F0dup".into(), levels: d.schema().field(0).levels.clone() },
        d.schema().field(1).clone(),
        d.schema().field(2).clone(),
        d.schema().field(3).clone(),
    ])
    .unwrap();
    let rows = d
        .rows()
        .iter()
        .map(|r| Row { values: vec![r.values[0], r.values[0], r.values[1], r.values[2], r.values[3]], label: r.label })
        .collect();
    let dup = matrix(&s2, rows);
    let p = TreeParams { n_trees: 30, ..TreeParams::gbdt_default() };
    let orig = fit_gbdt_importance(&base, base.labels(), &p).unwrap();
    let both = fit_gbdt_importance(&dup, dup.labels(), &p).unwrap();
    let combined = both.scores()[0] + both.scores()[1];
    let rel = (combined - orig.scores()[0]).abs() / orig.scores()[0];
    assert!(rel <= 0.10, "combined {combined} vs original {}", orig.scores()[0]);
}

#[test]
fn zero_rounds_is_error() {
    let x = separable();
    let p = TreeParams { n_trees: 0, ..TreeParams::gbdt_default() };
    assert!(fit_gbdt_importance(&x, x.labels(), &p).is_err());
}

#[test]
fn single_class_is_error() {
    let s = schema(2, 2);
    let x = matrix(&s, (0..10).map(|i| Row { values: vec![i % 2, 0], label: 1 }).collect());
    assert!(fit_forest_importance(&x, x.labels(), &small(3, 2)).is_err());
    assert!(fit_gbdt_importance(&x, x.labels(), &TreeParams::gbdt_default()).is_err());
}

#[test]
fn row_permutation_invariance_without_bootstrap() {
    let x = noisy_informative(400, 8);
    let mut perm: Vec<usize> = (0..x.n_rows()).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(1));
    let xp = x.select_rows(&perm);
    let p = TreeParams { n_trees: 1, feature_subsample: 1.0, bootstrap: false, ..TreeParams::forest_default() };
    let a = fit_forest_importance(&x, x.labels(), &p).unwrap();
    let b = fit_forest_importance(&xp, xp.labels(), &p).unwrap();
    assert_eq!(a.order(), b.order());
    let q = TreeParams { n_trees: 1, ..TreeParams::gbdt_default() };
    let a = fit_gbdt_importance(&x, x.labels(), &q).unwrap();
    let b = fit_gbdt_importance(&xp, xp.labels(), &q).unwrap();
    assert_eq!(a.order(), b.order());
}

#[test]
fn determining_field_ranks_first_for_any_seed() {
    let s = schema(5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let rows: Vec<Row> = (0..300)
        .map(|_| {
            let label = rng.random_range(0..3);
            let mut values: Vec<usize> = (0..5).map(|_| rng.random_range(0..3)).collect();
            values[3] = label;
            Row { values, label }
        })
        .collect();
    let x = matrix(&s, rows);
    for seed in 0..5 {
        let f = fit_forest_importance(&x, x.labels(), &TreeParams { n_trees: 25, seed, ..TreeParams::forest_default() }).unwrap();
        let g = fit_gbdt_importance(&x, x.labels(), &TreeParams { n_trees: 10, seed, ..TreeParams::gbdt_default() }).unwrap();
        assert_eq!(f.order()[0], 3);
        assert_eq!(g.order()[0], 3);
    }
}

#[test]
fn ranking_rows_report_selection() {
    let x = noisy_informative(300, 2);
    let f = fit_forest_importance(&x, x.labels(), &small(10, 3)).unwrap();
    let g = fit_gbdt_importance(&x, x.labels(), &TreeParams { n_trees: 5, ..TreeParams::gbdt_default() }).unwrap();
    let sel = select_common_topk(&f, &g, 2).unwrap();
    assert!(sel.len() <= 2);
    let topf: Vec<usize> = f.order()[..2].to_vec();
    let topg: Vec<usize> = g.order()[..2].to_vec();
    assert!(sel.iter().all(|s| topf.contains(s) && topg.contains(s)));
    let rows = ranking_rows(&f, &g, &sel);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r.selected).count(), sel.len());
}
