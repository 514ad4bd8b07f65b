use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sev_forge::resample::*;
use sev_forge::tabular::*;

fn schema(n_fields: usize, levels: usize) -> Schema {
    let names: Vec<String> = (0..levels).map(|l| format!("l{l}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Schema::with_fields((0..n_fields).map(|f| Field::new(format!("F{f}"), &refs)).collect()).unwrap()
}

/// Schema whose fields each have two levels, so raw 2-wide rows are valid matrices.
fn dense(rows: &[Vec<f64>], labels: Vec<usize>) -> EncodedMatrix {
    let s = schema(rows[0].len() / 2, 2);
    EncodedMatrix::from_parts(s, rows.concat(), labels).unwrap()
}

fn random_onehot(rng: &mut ChaCha8Rng, n: usize, fields: usize, levels: usize, classes: usize) -> EncodedMatrix {
    let s = schema(fields, levels);
    let rows = (0..n)
        .map(|i| Row {
            values: (0..fields).map(|_| rng.random_range(0..levels)).collect(),
            // guarantee every class shows up
            label: if i < classes { i } else { rng.random_range(0..classes) },
        })
        .collect();
    encode_onehot(&Dataset::new(s, rows).unwrap()).unwrap()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exhaustive oracle: sort every other eligible row by (distance, index).
fn oracle_knn(x: &EncodedMatrix, q: usize, k: usize, class: Option<usize>) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = (0..x.n_rows())
        .filter(|&j| j != q && class.is_none_or(|c| x.labels()[j] == c))
        .map(|j| (dist2(x.row(q), x.row(j)), j))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, j)| j).collect()
}

fn oracle_enn(x: &EncodedMatrix, k: usize) -> Vec<bool> {
    (0..x.n_rows())
        .map(|i| {
            let mut votes = [0; 3];
            for j in oracle_knn(x, i, k, None) {
                votes[x.labels()[j]] += 1;
            }
            let own = votes[x.labels()[i]];
            votes.iter().all(|&v| v <= own)
        })
        .collect()
}

#[test]
fn identical_rows_tie_break_by_index() {
    let x = dense(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]], vec![0, 0, 0]);
    assert_eq!(knn_indices(&x, 0, 2, None).unwrap(), vec![1, 2]);
}

#[test]
fn nearest_by_inspection() {
    let x = dense(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 0.0]], vec![0, 0, 0]);
    assert_eq!(knn_indices(&x, 0, 1, None).unwrap(), vec![1]);
    assert!(knn_indices(&x, 0, 3, None).is_err());
}

#[test]
fn knn_matches_exhaustive_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..10).map(|_| rng.random::<f64>()).collect()).collect();
    let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
    let x = dense(&rows, labels);
    for q in 0..50 {
        for k in [1, 4, 9] {
            assert_eq!(knn_indices(&x, q, k, None).unwrap(), oracle_knn(&x, q, k, None));
            assert_eq!(knn_indices(&x, q, k, Some(1)).unwrap(), oracle_knn(&x, q, k, Some(1)));
        }
    }
    // heavy ties: one-hot rows over few levels
    let x = random_onehot(&mut rng, 120, 3, 2, 3);
    for q in 0..120 {
        assert_eq!(knn_indices(&x, q, 7, None).unwrap(), oracle_knn(&x, q, 7, None));
    }
}

#[test]
fn midpoint() {
    // class 1 rows (0,0) and (1,1); class 0 is the majority so class 1 needs synthetics
    let x = dense(
        &[vec![0.0, 0.0], vec![1.0, 1.0], vec![3.0, 3.0], vec![3.0, 3.0], vec![3.0, 3.0]],
        vec![1, 1, 0, 0, 0],
    );
    let p = ResampleParams { smote_k: 1, snap_categorical: false, ..Default::default() };
    let (out, prov) = smote_with_provenance(&x, &p).unwrap();
    assert_eq!(out.n_rows(), 6);
    let s = prov[0];
    let expect: Vec<f64> = x.row(s.seed_row).iter().zip(x.row(s.neighbour)).map(|(a, b)| a + s.lambda * (b - a)).collect();
    assert_eq!(out.row(5), expect.as_slice());
    assert!((0.0..1.0).contains(&s.lambda));
}

#[test]
fn identical_class_rows_give_identical_synthetics() {
    let mut rows = vec![vec![1.0, 0.0, 0.0, 1.0]; 4];
    rows.extend(vec![vec![0.0, 1.0, 1.0, 0.0]; 10]);
    let mut labels = vec![2; 4];
    labels.extend(vec![1; 10]);
    let x = dense(&rows, labels);
    for snap in [false, true] {
        let p = ResampleParams { smote_k: 3, snap_categorical: snap, ..Default::default() };
        let out = smote(&x, &p).unwrap();
        assert_eq!(out.class_counts(), [0, 10, 10]);
        for i in 14..out.n_rows() {
            assert_eq!(out.labels()[i], 2);
            assert_eq!(out.row(i), &[1.0, 0.0, 0.0, 1.0]);
        }
    }
}

#[test]
fn class_too_small_for_k() {
    let x = dense(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]], vec![0, 1, 1, 1]);
    assert!(smote(&x, &ResampleParams { smote_k: 1, ..Default::default() }).is_err());
}

#[test]
fn unsnapped_samples_are_collinear_with_a_neighbour() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for inst in 0..10 {
        let x = random_onehot(&mut rng, 80, 4, 3, 3);
        let p = ResampleParams { smote_k: 3, snap_categorical: false, seed: inst, ..Default::default() };
        let (out, prov) = smote_with_provenance(&x, &p).unwrap();
        let base = x.n_rows();
        assert_eq!(out.n_rows(), base + prov.len());
        for (s_i, s) in prov.iter().enumerate() {
            let row = out.row(base + s_i);
            let c = out.labels()[base + s_i];
            assert_eq!(x.labels()[s.seed_row], c);
            assert!(oracle_knn(&x, s.seed_row, 3, Some(c)).contains(&s.neighbour));
            let (a, b) = (x.row(s.seed_row), x.row(s.neighbour));
            // recover λ from the first differing coordinate, then check every coordinate
            let lam = (0..a.len()).find(|&j| a[j] != b[j]).map(|j| (row[j] - a[j]) / (b[j] - a[j]));
            match lam {
                None => assert_eq!(row, a),
                Some(l) => {
                    assert!((-1e-12..=1.0 + 1e-12).contains(&l), "lambda {l}");
                    for j in 0..a.len() {
                        assert!((row[j] - (a[j] + l * (b[j] - a[j]))).abs() < 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn snapped_output_is_onehot_and_smote_never_removes() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for seed in 0..10 {
        let x = random_onehot(&mut rng, 90, 5, 4, 3);
        let out = smote(&x, &ResampleParams { seed, ..Default::default() }).unwrap();
        assert!(out.is_onehot());
        let (a, b) = (x.class_counts(), out.class_counts());
        assert!((0..3).all(|c| b[c] >= a[c]));
        assert_eq!(out.select_rows(&(0..x.n_rows()).collect::<Vec<_>>()), x);
    }
}

#[test]
fn enn_removes_intruder() {
    let mut rows = vec![vec![0.0, 0.0]; 4];
    rows.push(vec![0.1, 0.0]);
    let x = dense(&rows, vec![0, 0, 0, 0, 1]);
    let keep = enn(&x, &ResampleParams::default()).unwrap();
    assert_eq!(keep, vec![true, true, true, true, false]);
}

#[test]
fn enn_single_class_keeps_all_and_needs_rows() {
    let x = dense(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 0.0], vec![4.0, 0.0]], vec![2; 4]);
    assert!(enn(&x, &ResampleParams::default()).unwrap().iter().all(|&k| k));
    let tiny = dense(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 0.0]], vec![2; 3]);
    assert!(enn(&tiny, &ResampleParams::default()).is_err());
}

#[test]
fn enn_matches_brute_force_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for inst in 0..100 {
        let n = rng.random_range(10..=200);
        let k = [1, 3, 5][inst % 3];
        let x = random_onehot(&mut rng, n, 4, 3, 3);
        let p = ResampleParams { enn_k: k, ..Default::default() };
        assert_eq!(enn(&x, &p).unwrap(), oracle_enn(&x, k), "instance {inst}");
    }
}

#[test]
fn balanced_separated_fixed_point() {
    let s = schema(2, 3);
    let rows: Vec<Row> = (0..30).map(|i| Row { values: vec![i % 3, i % 3], label: i % 3 }).collect();
    let x = encode_onehot(&Dataset::new(s, rows).unwrap()).unwrap();
    let (out, stats) = smoteenn(&x, &ResampleParams::default()).unwrap();
    assert_eq!(out, x);
    assert!(stats.0.iter().all(|c| c.before == 10 && c.after_smote == 10 && c.after_enn == 10));
}

#[test]
fn stats_json_shape() {
    let stats = ResampleStats(vec![ClassStats { class: "KA".into(), before: 1, after_smote: 2, after_enn: 2 }]);
    assert_eq!(
        serde_json::to_string(&stats).unwrap(),
        r#"[{"class":"KA","before":1,"after_smote":2,"after_enn":2}]"#
    );
}

#[test]
fn target_parses_both_forms() {
    let p: ResampleParams = serde_json::from_str(
        r#"{"smote_k":5,"enn_k":3,"target":"match-majority","seed":1,"snap_categorical":true}"#,
    )
    .unwrap();
    assert_eq!(p.target, Target::MatchMajority);
    let p: ResampleParams =
        serde_json::from_str(r#"{"smote_k":5,"enn_k":3,"target":[10,10,12],"seed":1,"snap_categorical":true}"#).unwrap();
    assert_eq!(p.target, Target::Counts([10, 10, 12]));
    assert!(ResampleParams { enn_k: 2, ..Default::default() }.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn enn_never_grows_a_class_and_is_deterministic(seed in 0u64..1000, n in 30usize..120) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_onehot(&mut rng, n, 4, 3, 3);
        prop_assume!(x.class_counts().iter().all(|&c| c > 5));
        let p = ResampleParams { seed, ..Default::default() };
        let (a, stats) = smoteenn(&x, &p).unwrap();
        for c in &stats.0 {
            prop_assert!(c.after_enn <= c.after_smote);
            prop_assert!(c.after_smote >= c.before);
        }
        let (b, stats2) = smoteenn(&x, &p).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(stats, stats2);
    }
}
