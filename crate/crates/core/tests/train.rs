use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sev_autodiff::PlateauState;
use sev_forge::models::{HyperParams, ModelKind};
use sev_forge::tabular::*;
use sev_forge::train::*;

/// Three informative fields (the first always equals the label) plus two noise fields.
fn separable(n_per_class: usize, seed: u64, flip: bool) -> EncodedMatrix {
    let schema = Schema::with_fields(vec![
        Field::new("I0", &["a", "b", "c"]),
        Field::new("I1", &["a", "b", "c"]),
        Field::new("I2", &["a", "b", "c"]),
        Field::new("N0", &["p", "q", "r", "s"]),
        Field::new("N1", &["p", "q"]),
    ])
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for c in 0..3 {
        for _ in 0..n_per_class {
            let noisy = |rng: &mut ChaCha8Rng| if rng.random::<f64>() < 0.8 { c } else { rng.random_range(0..3) };
            let values = vec![c, noisy(&mut rng), noisy(&mut rng), rng.random_range(0..4), rng.random_range(0..2)];
            let label = if flip { (c + 1) % 3 } else { c };
            rows.push(Row { values, label });
        }
    }
    encode_onehot(&Dataset::new(schema, rows).unwrap()).unwrap()
}

fn spec(kind: ModelKind) -> RunSpec {
    RunSpec {
        model: kind,
        seed: 11,
        ..RunSpec::default()
    }
}

#[test]
fn both_models_fit_separable_data() {
    let train = separable(200, 1, false);
    let val = separable(50, 2, false);
    for kind in ModelKind::ALL {
        let out = train_model::<f64>(&spec(kind), &train, &val).unwrap();
        let (_, acc) = evaluate_loss(&out.model, &train).unwrap();
        eprintln!("{kind}: train accuracy {acc:.4} after {} epochs", out.history.len());
        assert!(acc >= 0.95, "{kind}: {acc}");
        assert!(out.history.len() <= 50);

        // best-epoch restore
        let (vl, _) = evaluate_loss(&out.model, &val).unwrap();
        let min = out.history.rows.iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(vl, min);
        assert_eq!(out.best().val_loss, min);

        // lr column replays from the val-loss column
        let s = spec(kind);
        let mut plateau = PlateauState::new(s.plateau_patience, s.plateau_factor, s.min_lr);
        plateau.threshold = s.min_delta;
        let mut lr = s.hyper.lr;
        for r in &out.history.rows {
            assert_eq!(r.lr, lr);
            lr = plateau.step(r.val_loss, lr);
        }
        assert!(out.history.rows.windows(2).all(|w| w[1].lr <= w[0].lr));
    }
}

#[test]
fn patience_one_restores_first_epoch() {
    let train = separable(60, 3, false);
    // validation labels rotated: learning the training rule makes val loss worse
    let val = separable(30, 4, true);
    let mut s = spec(ModelKind::Mambanet);
    s.patience = 1;
    s.hyper.lr = 1e-2;
    let out = train_model::<f64>(&s, &train, &val).unwrap();
    let h = &out.history.rows;
    assert!(h[1].val_loss > h[0].val_loss, "precondition: {h:?}");
    assert_eq!(h.len(), 2);
    assert!(out.early_stopped);
    assert_eq!(out.best_epoch, 1);
    assert_eq!(evaluate_loss(&out.model, &val).unwrap().0, h[0].val_loss);
}

#[test]
fn identical_specs_give_identical_runs() {
    let train = separable(40, 5, false);
    let val = separable(10, 6, false);
    for kind in ModelKind::ALL {
        let mut s = spec(kind);
        s.hyper.epochs = 4;
        let a = train_model::<f64>(&s, &train, &val).unwrap();
        let b = train_model::<f64>(&s, &train, &val).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.model.params(), b.model.params());
        assert_eq!(a.history.to_csv_string(), b.history.to_csv_string());
    }
}

#[test]
fn epoch_batches_partition_the_training_set() {
    for epoch in 1..5 {
        let order = epoch_order(3, epoch, 103);
        let set: BTreeSet<usize> = order.iter().copied().collect();
        assert_eq!(order.len(), 103);
        assert_eq!(set, (0..103).collect());
        let batches: Vec<&[usize]> = order.chunks(32).collect();
        assert_eq!(batches.last().unwrap().len(), 103 % 32);
    }
    assert_ne!(epoch_order(3, 1, 50), epoch_order(3, 2, 50));
}

#[test]
fn input_errors() {
    let train = separable(10, 7, false);
    let empty_val = train.select_rows(&[]);
    assert!(train_model::<f64>(&spec(ModelKind::Armnet), &train, &empty_val).is_err());
    let mut s = spec(ModelKind::Armnet);
    s.patience = 0;
    assert!(train_model::<f64>(&s, &train, &train).is_err());
    s.patience = 10;
    s.hyper.epochs = 0;
    assert!(train_model::<f64>(&s, &train, &train).is_err());
}

#[test]
fn divergence_is_numerical_error() {
    let train = separable(20, 8, false);
    let mut s = spec(ModelKind::Armnet);
    s.hyper.lr = 1e30;
    s.hyper.epochs = 5;
    let err = train_model::<f32>(&s, &train, &train).unwrap_err();
    assert_eq!(err.class(), sev_forge::ErrorClass::Numerical, "{err}");
}

fn tiny_base(kind: ModelKind) -> RunSpec {
    RunSpec {
        model: kind,
        hyper: HyperParams {
            epochs: 3,
            ..HyperParams::default()
        },
        seed: 21,
        ..RunSpec::default()
    }
}

#[test]
fn single_draw_is_the_winner() {
    let train = separable(10, 9, false);
    let val = separable(5, 10, false);
    let out = random_search::<f64>(&SearchSpace::default(), 1, &tiny_base(ModelKind::Armnet), &train, &val).unwrap();
    assert_eq!(out.leaderboard.entries.len(), 1);
    assert_eq!(out.leaderboard.winner().spec, out.best);
    assert_eq!(out.leaderboard.winner().rank, 1);
}

#[test]
fn degenerate_space_draws_one_config() {
    let train = separable(10, 9, false);
    let val = separable(5, 10, false);
    let space = SearchSpace {
        lr: vec![3e-3],
        dropout_rate: vec![0.2],
        batch_size: vec![16],
        hidden_dim: vec![32],
        hidden_dims: vec![vec![16]],
        weight_decay: vec![0.0],
    };
    let out = random_search::<f64>(&space, 4, &tiny_base(ModelKind::Mambanet), &train, &val).unwrap();
    let hypers: Vec<_> = out.leaderboard.entries.iter().map(|e| &e.spec.hyper).collect();
    assert!(hypers.iter().all(|h| *h == hypers[0]));
    assert_eq!(out.best.hyper, *hypers[0]);
    assert_eq!(out.best.hyper.lr, 3e-3);
}

#[test]
fn empty_search_list_rejected() {
    let train = separable(10, 9, false);
    let space = SearchSpace { lr: vec![], ..SearchSpace::default() };
    assert!(random_search::<f64>(&space, 2, &tiny_base(ModelKind::Armnet), &train, &train).is_err());
    assert!(random_search::<f64>(&SearchSpace::default(), 0, &tiny_base(ModelKind::Armnet), &train, &train).is_err());
}

#[test]
fn failed_draws_rank_last() {
    let train = separable(10, 9, false);
    let val = separable(5, 10, false);
    // batch size 0 fails validation, so roughly half the draws fail
    let space = SearchSpace { batch_size: vec![0, 16], ..SearchSpace::default() };
    let out = random_search::<f64>(&space, 8, &tiny_base(ModelKind::Armnet), &train, &val).unwrap();
    let e = &out.leaderboard.entries;
    let first_fail = e.iter().position(|x| x.error.is_some()).expect("some draw fails");
    assert!(e[first_fail..].iter().all(|x| x.error.is_some()));
    assert!(e[..first_fail].iter().all(|x| x.val_loss.is_some()));

    let all_bad = SearchSpace { batch_size: vec![0], ..SearchSpace::default() };
    assert!(random_search::<f64>(&all_bad, 3, &tiny_base(ModelKind::Armnet), &train, &val).is_err());
}
