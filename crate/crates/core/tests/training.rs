use simreal_core::linalg::{Matrix, Rng};
use simreal_core::stats::accuracy;
use simreal_core::synth::{feature_names, generate};
use simreal_core::train::{domain_probe, predict, train_dann, train_nn, LambdaMode};
use simreal_core::{Dataset, Domain, ScenarioConfig, Schema, TrainConfig, TrainRun};

/// Uniform points in [-3, 3]² labeled by x0 + x1 > 0, keeping only points at
/// distance ≥ 0.5 from the boundary (margin 1).
fn separable_toy(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    while labels.len() < n {
        let x0 = rng.uniform_range(-3.0, 3.0);
        let x1 = rng.uniform_range(-3.0, 3.0);
        let s = (x0 + x1) / 2f64.sqrt();
        if s.abs() < 0.5 {
            continue;
        }
        data.extend([x0, x1]);
        labels.push(u8::from(s > 0.0));
    }
    let schema = Schema::new(vec!["a".into(), "b".into()]).with_label("y");
    Dataset::new(
        schema,
        Matrix::new(n, 2, data).unwrap(),
        Some(labels),
        None,
        None,
        Domain::Source,
    )
    .unwrap()
}

fn shifted_controls(n: usize, shift: f64, seed: u64) -> (Dataset, Dataset) {
    let mut rng = Rng::new(seed);
    let schema = Schema::new(vec!["a".into(), "b".into()]);
    let mut make = |offset: f64, domain| {
        let data = (0..2 * n).map(|_| rng.normal() + offset).collect();
        Dataset::new(
            schema.clone(),
            Matrix::new(n, 2, data).unwrap(),
            None,
            None,
            None,
            domain,
        )
        .unwrap()
    };
    let cs = make(0.0, Domain::Source);
    let ct = make(shift, Domain::Target);
    (cs, ct)
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

#[test]
fn separable_toy_reaches_99_percent_within_50_epochs() {
    let ds = separable_toy(500, 11);
    let run = train_nn(&TrainConfig::with_epochs(50), &ds).unwrap();
    let best = run
        .history
        .records
        .iter()
        .map(|r| r.test_accuracy)
        .fold(0.0, f64::max);
    assert!(best >= 0.99, "best test accuracy {best}");
}

#[test]
fn training_is_bit_deterministic() {
    let ds = separable_toy(300, 2);
    let (cs, ct) = shifted_controls(200, 0.5, 3);
    let mut cfg = TrainConfig::with_epochs(4);
    cfg.batch_size = 64;
    cfg.domain_batch_size = 64;
    let a = train_dann(&cfg, &ds, &cs, &ct).unwrap();
    let b = train_dann(&cfg, &ds, &cs, &ct).unwrap();
    for (x, y) in a.params.tensors().iter().zip(b.params.tensors()) {
        assert_eq!(bits(x), bits(y));
    }
    assert_eq!(a.history, b.history);
    assert_eq!(train_nn(&cfg, &ds).unwrap(), train_nn(&cfg, &ds).unwrap());
}

#[test]
fn nn_training_leaves_domain_head_at_init() {
    let ds = separable_toy(300, 4);
    let mut cfg = TrainConfig::with_epochs(5);
    cfg.batch_size = 32;
    let nn = train_nn(&cfg, &ds).unwrap();
    // Initialization uses stream 1 of the run seed.
    let init = simreal_core::NetParams::init(
        2,
        cfg.hidden,
        &mut Rng::stream(cfg.seed, 1),
        simreal_core::network::InitRule::GlorotUniform,
    )
    .unwrap();
    assert_eq!(bits(nn.params.wd.data()), bits(init.wd.data()));
    assert_eq!(bits(&nn.params.bd), bits(&init.bd));
    assert_ne!(bits(nn.params.w1.data()), bits(init.w1.data()));
}

#[test]
fn lambda_zero_dann_follows_nn_feature_trajectory() {
    let ds = separable_toy(400, 5);
    let (cs, ct) = shifted_controls(300, 1.0, 6);
    for epochs in 1..=5 {
        let mut cfg = TrainConfig::with_epochs(epochs);
        cfg.batch_size = 50;
        cfg.domain_batch_size = 40;
        cfg.lambda_value = 0.0;
        let nn = train_nn(&cfg, &ds).unwrap();
        let dann = train_dann(&cfg, &ds, &cs, &ct).unwrap();
        let pairs = [
            (nn.params.w1.data(), dann.params.w1.data()),
            (&nn.params.b1[..], &dann.params.b1[..]),
            (nn.params.wc.data(), dann.params.wc.data()),
            (&nn.params.bc[..], &dann.params.bc[..]),
        ];
        for (a, b) in pairs {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= 1e-12, "epoch {epochs}: {x} vs {y}");
            }
        }
        assert_ne!(
            bits(nn.params.wd.data()),
            bits(dann.params.wd.data()),
            "domain head must train"
        );
    }
}

#[test]
fn history_has_one_record_per_epoch() {
    let ds = separable_toy(200, 7);
    let (cs, ct) = shifted_controls(100, 0.5, 8);
    let mut cfg = TrainConfig::with_epochs(7);
    cfg.batch_size = 30;
    cfg.domain_batch_size = 20;
    cfg.lambda_mode = LambdaMode::GaninSchedule;
    for run in [
        train_nn(&cfg, &ds).unwrap(),
        train_dann(&cfg, &ds, &cs, &ct).unwrap(),
    ] {
        assert_eq!(run.history.records.len(), 7);
        for (i, r) in run.history.records.iter().enumerate() {
            assert_eq!(r.epoch, i + 1);
            assert!((0.0..=1.0).contains(&r.train_accuracy));
            assert!((0.0..=1.0).contains(&r.test_accuracy));
        }
    }
    let dann = train_dann(&cfg, &ds, &cs, &ct).unwrap();
    let first = &dann.history.records[0];
    assert_eq!(first.lambda, Some(0.0));
    assert!(first.domain_loss.is_some());
}

#[test]
fn final_history_accuracy_matches_offline_recomputation() {
    let ds = separable_toy(300, 9);
    let mut cfg = TrainConfig::with_epochs(6);
    cfg.batch_size = 40;
    let run = train_nn(&cfg, &ds).unwrap();
    let check = |run: &TrainRun| {
        let last = run.history.records.last().unwrap();
        let p = predict(&run.params, &run.standardizer, run.test.features()).unwrap();
        assert_eq!(
            accuracy(&p, run.test.labels().unwrap(), 0.5).unwrap(),
            last.test_accuracy
        );
        let p = predict(&run.params, &run.standardizer, run.train.features()).unwrap();
        assert_eq!(
            accuracy(&p, run.train.labels().unwrap(), 0.5).unwrap(),
            last.train_accuracy
        );
    };
    check(&run);
}

#[test]
fn standardizer_is_fit_on_source_train_split_only() {
    let ds = separable_toy(300, 10);
    let run = train_nn(&TrainConfig::with_epochs(1), &ds).unwrap();
    let z = run.standardizer.transform(run.train.features()).unwrap();
    for j in 0..2 {
        let m = z.column(j).iter().sum::<f64>() / z.rows() as f64;
        assert!(m.abs() < 1e-9);
    }
    let zt = run.standardizer.transform(run.test.features()).unwrap();
    let mt = zt.column(0).iter().sum::<f64>() / zt.rows() as f64;
    assert!(mt.abs() > 1e-9, "test split must not be used in fitting");
}

#[test]
fn empty_or_unlabeled_inputs_are_rejected() {
    let ds = separable_toy(100, 12);
    let cfg = TrainConfig::with_epochs(1);
    assert!(train_nn(&cfg, &ds.without_labels()).is_err());
    let (cs, ct) = shifted_controls(10, 0.0, 1);
    let empty = ct.select(&[]);
    assert!(train_dann(&cfg, &ds, &cs, &empty).is_err());
}

#[test]
fn large_lambda_stays_finite_on_synth_defaults() {
    let b = generate(&ScenarioConfig::default()).unwrap();
    let mut cfg = TrainConfig::with_epochs(50);
    cfg.lambda_value = 10.0;
    let run = train_dann(&cfg, &b.source, &b.control_source, &b.control_target).unwrap();
    assert!(run
        .params
        .tensors()
        .iter()
        .all(|t| t.iter().all(|v| v.is_finite())));
    for r in &run.history.records {
        assert!(r.class_loss.is_finite() && r.domain_loss.unwrap().is_finite());
    }
}

// Fails: a fresh linear probe separates DANN's hidden features as well as
// NN's (about 0.66 both) for every λ / schedule / lr tried, although the
// adversarial head itself sits at chance. Run with `--ignored` to see it.
#[test]
#[ignore = "known failure: probe accuracy does not drop for DANN features"]
fn dann_features_hide_the_domain_from_a_probe() {
    let scenario = ScenarioConfig::default();
    let b = generate(&scenario).unwrap();
    let held_out = generate(&ScenarioConfig {
        seed: scenario.seed + 1000,
        ..scenario.clone()
    })
    .unwrap();
    assert_eq!(
        held_out.control_source.schema().feature_columns,
        feature_names(scenario.d)
    );

    let mut cfg = TrainConfig::with_epochs(100);
    cfg.batch_size = 256;
    cfg.domain_batch_size = 1024;
    cfg.lambda_value = 30.0;
    cfg.seed = 1;
    let nn = train_nn(&cfg, &b.source).unwrap();
    let dann = train_dann(&cfg, &b.source, &b.control_source, &b.control_target).unwrap();
    let probe = |r: &TrainRun| {
        domain_probe(
            &r.params,
            &r.standardizer,
            &held_out.control_source,
            &held_out.control_target,
            77,
        )
        .unwrap()
    };
    let (p_nn, p_dann) = (probe(&nn), probe(&dann));
    assert!(
        p_dann <= p_nn - 0.05,
        "probe accuracy nn {p_nn}, dann {p_dann}"
    );
}
