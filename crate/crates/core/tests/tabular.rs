use proptest::prelude::*;
use sev_forge::tabular::*;

const COUNTS: [usize; 3] = [2858, 6246, 1622];

fn labels_from_counts(counts: &[usize]) -> Vec<usize> {
    counts.iter().enumerate().flat_map(|(c, &n)| std::iter::repeat_n(c, n)).collect()
}

#[test]
fn fixture_schema_has_50_columns() {
    let p = GeneratorProfile::motorcyclist();
    let levels: Vec<usize> = p.schema().fields().iter().map(|f| f.levels.len()).collect();
    assert_eq!(levels, vec![5; 10]);
    let ds = synth_generate(&p.clone().with_class_counts([3, 3, 3]), 1);
    let m = encode_onehot(&ds).unwrap();
    assert_eq!(m.n_cols(), 50);
    assert!(m.is_onehot());
    assert_eq!(m.decode(), ds);
}

#[test]
fn straight_level_lookup() {
    let p = GeneratorProfile::motorcyclist();
    let text = "RoadAlgn,TrafCtrl,FHE_Collsn,OthrFactor,Cls,Pop,CSpd,CrashHr,PrsnEthnicity,PrsnHelmet,Severity\n\
        \"Straight, level\",None,rear end,Other,Interstate,Rural,Unknown,00-06,Asian,\"Worn, damaged\",BC\n\
        Gravel,None,rear end,Other,Interstate,Rural,Unknown,00-06,Asian,\"Worn, damaged\",BC\n";
    let ds = read_dataset_csv(text.as_bytes(), p.schema()).unwrap();
    assert_eq!(ds.rows()[0].values[0], 3);
    assert_eq!(ds.rows()[1].values[0], 4);
}

#[test]
fn split_of_10726_rows() {
    let labels = labels_from_counts(&COUNTS);
    let s = split_indices(&labels, &SplitSpec { seed: 7, ..Default::default() }).unwrap();
    let per_class = |idx: &[usize]| class_counts(idx.iter().map(|&i| labels[i]));
    // floor(0.6·n_c), floor(0.2·n_c), remainder
    assert_eq!(per_class(&s.train), [1714, 3747, 973]);
    assert_eq!(per_class(&s.val), [571, 1249, 324]);
    assert_eq!(per_class(&s.test), [573, 1250, 325]);
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (6434, 2144, 2148));
}

#[test]
fn class_weights_on_fixture_counts() {
    let labels = labels_from_counts(&COUNTS);
    let w = class_weights(&labels, 3).unwrap();
    // 10726 / (3 · n_c)
    for (got, want) in w.iter().zip([1.2510, 0.5724, 2.2043]) {
        assert!((got - want).abs() < 1e-4, "{w:?}");
    }
    let total: f64 = w.iter().zip(COUNTS).map(|(w, n)| w * n as f64).sum();
    assert!((total - 10726.0).abs() < 1e-9 * 10726.0);
}

#[test]
fn straight_level_frequency_within_three_sigma() {
    let p = GeneratorProfile::motorcyclist();
    let ds = synth_generate(&p, 2024);
    let road = p.schema().field_index("RoadAlgn").unwrap();
    let straight = p.schema().field(road).level_index("Straight, level").unwrap();
    let ka: Vec<_> = ds.rows().iter().filter(|r| r.label == 0).collect();
    assert_eq!(ka.len(), 2858);
    let freq = ka.iter().filter(|r| r.values[road] == straight).count() as f64 / 2858.0;
    let p0: f64 = 0.676;
    let sigma = (p0 * (1.0 - p0) / 2858.0).sqrt();
    assert!((freq - p0).abs() <= 3.0 * sigma, "freq {freq}");
}

/// Upper 0.001 quantiles of chi-square for 1..=4 degrees of freedom.
const CHI2_999: [f64; 4] = [10.828, 13.816, 16.266, 18.467];

#[test]
fn generator_passes_chi_square_goodness_of_fit() {
    let p = GeneratorProfile::motorcyclist();
    for seed in [42, 4242] {
        let ds = synth_generate(&p, seed);
        for c in 0..3 {
            let rows: Vec<_> = ds.rows().iter().filter(|r| r.label == c).collect();
            let n = rows.len() as f64;
            for f in 0..p.schema().num_fields() {
                let probs = p.marginal(c, f);
                let mut obs = vec![0.0; probs.len()];
                for r in &rows {
                    obs[r.values[f]] += 1.0;
                }
                // pool levels with expected count < 5 into one cell
                let (mut cells, mut rare_o, mut rare_e) = (Vec::new(), 0.0, 0.0);
                for (o, &q) in obs.iter().zip(probs) {
                    if n * q < 5.0 {
                        rare_o += o;
                        rare_e += n * q;
                    } else {
                        cells.push((*o, n * q));
                    }
                }
                if rare_e > 0.0 {
                    cells.push((rare_o, rare_e));
                }
                let stat: f64 = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
                let df = cells.len() - 1;
                assert!(stat < CHI2_999[df - 1], "seed {seed} class {c} field {f}: chi2 {stat} df {df}");
            }
        }
    }
}

#[test]
fn profile_json_is_versioned() {
    let bad = MOTORCYCLIST_PROFILE_JSON.replacen("\"profile_version\": 1", "\"profile_version\": 2", 1);
    assert_ne!(bad, MOTORCYCLIST_PROFILE_JSON);
    assert!(GeneratorProfile::from_json_str(&bad).is_err());
}

#[test]
fn generator_is_deterministic() {
    let p = GeneratorProfile::motorcyclist().with_class_counts([50, 50, 50]);
    assert_eq!(synth_generate(&p, 5), synth_generate(&p, 5));
    assert_ne!(synth_generate(&p, 5), synth_generate(&p, 6));
}

fn small_schema() -> Schema {
    Schema::with_fields(vec![Field::new("A", &["a", "b", "c"]), Field::new("B", &["x", "y"])]).unwrap()
}

prop_compose! {
    fn dataset()(rows in prop::collection::vec((0usize..3, 0usize..2, 0usize..3), 9..200)) -> Dataset {
        let rows = rows.into_iter().map(|(a, b, l)| Row { values: vec![a, b], label: l }).collect();
        Dataset::new(small_schema(), rows).unwrap()
    }
}

proptest! {
    #[test]
    fn split_is_a_partition(ds in dataset(), seed in any::<u64>()) {
        let labels = ds.labels();
        let counts = ds.class_counts();
        prop_assume!(counts.iter().all(|&c| c == 0 || c >= 3));
        let spec = SplitSpec { seed, ..Default::default() };
        let s = split_indices(&labels, &spec).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        // train and val are floors (off by < 1); test takes the remainder, so it
        // absorbs both rounding losses (off by < 2)
        for (part, frac, slack) in [(&s.train, 0.6, 1.0), (&s.val, 0.2, 1.0), (&s.test, 0.2, 2.0)] {
            let got = class_counts(part.iter().map(|&i| labels[i]));
            for c in 0..3 {
                prop_assert!((got[c] as f64 - frac * counts[c] as f64).abs() < slack);
            }
        }
        let (tr, va, te) = stratified_split(&ds, &spec).unwrap();
        prop_assert_eq!(tr.len() + va.len() + te.len(), ds.len());
    }

    #[test]
    fn weights_identity(counts in prop::array::uniform3(1usize..500)) {
        let labels = labels_from_counts(&counts);
        let w = class_weights(&labels, 3).unwrap();
        let total: f64 = w.iter().zip(counts).map(|(w, n)| w * n as f64).sum();
        prop_assert!((total - labels.len() as f64).abs() <= 1e-9 * labels.len() as f64);
    }

    #[test]
    fn onehot_roundtrip(ds in dataset()) {
        let m = encode_onehot(&ds).unwrap();
        prop_assert!(m.is_onehot());
        prop_assert_eq!(m.decode(), ds);
    }

    #[test]
    fn csv_roundtrip(ds in dataset()) {
        let mut buf = Vec::new();
        write_dataset_csv(&ds, &mut buf).unwrap();
        prop_assert_eq!(read_dataset_csv(buf.as_slice(), &small_schema()).unwrap(), ds);
    }
}
