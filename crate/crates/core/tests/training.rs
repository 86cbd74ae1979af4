use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sqhardnet::activation::ActivationSpec;
use sqhardnet::distributions::{sample, DistributionSpec};
use sqhardnet::family::{eval_f_rows, ConceptId, FamilySpec};
use sqhardnet::training::{
    grad_sq_loss, preset, run_trial, sq_loss, train, trial_dataset, BatchMode, Dataset, Figure, MLPParams,
    StudentArch, TaskMode, TrainConfig,
};

fn act() -> impl Strategy<Value = ActivationSpec> {
    prop_oneof![
        Just(ActivationSpec::Tanh),
        Just(ActivationSpec::Sigmoid),
        Just(ActivationSpec::Identity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gradient_matches_central_differences(
        m in 1usize..8,
        n in 1usize..6,
        rows in 1usize..10,
        act in act(),
        seed in any::<u64>(),
    ) {
        let mut p = MLPParams::init(m, n, act, 1.0, seed).unwrap();
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6_364_136_223_846_793_005).wrapping_add(1_442_695_040_888_963_407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        p.b = Array1::from_shape_fn(m, |_| next());
        let xs = Array2::from_shape_fn((rows, n), |_| 2.0 * next());
        let ys = Array1::from_shape_fn(rows, |_| next());
        let analytic = grad_sq_loss(&p, &xs.view(), &ys.view()).unwrap().to_flat();
        let theta = p.to_flat();
        let h = 1e-5;
        let mut fd = vec![0.0; theta.len()];
        for j in 0..theta.len() {
            let (mut plus, mut minus) = (theta.clone(), theta.clone());
            plus[j] += h;
            minus[j] -= h;
            let lp = sq_loss(&p.with_flat(&plus).unwrap(), &xs.view(), &ys.view()).unwrap();
            let lm = sq_loss(&p.with_flat(&minus).unwrap(), &xs.view(), &ys.view()).unwrap();
            fd[j] = (lp - lm) / (2.0 * h);
        }
        let diff = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        prop_assert!(diff / scale <= 1e-6, "relative error {}", diff / scale);
    }
}

#[test]
fn trials_are_bit_reproducible() {
    let mut p = preset(Figure::Fig1a);
    p.epochs = 3;
    p.train_size = 500;
    p.test_size = 200;
    let a = run_trial(&p, 5).unwrap();
    let b = run_trial(&p, 5).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.records.len(), p.epochs + 1);
    assert_ne!(a, run_trial(&p, 6).unwrap());
}

#[test]
fn full_batch_train_loss_never_increases_after_warmup() {
    let mut p = preset(Figure::Fig1b);
    p.batch = BatchMode::Full;
    p.epochs = 110;
    p.train_size = 2000;
    p.test_size = 200;
    let mut monotone = 0;
    for seed in 0..10 {
        let curves = run_trial(&p, seed).unwrap();
        let losses: Vec<f64> = curves.records.iter().map(|r| r.train_sq_loss).collect();
        if losses[10..].windows(2).all(|w| w[1] <= w[0]) {
            monotone += 1;
        }
    }
    assert!(monotone >= 9, "{monotone}/10 seeds monotone");
}

#[test]
fn a_wide_student_learns_a_single_coordinate_target() {
    let n = 14;
    let spec = FamilySpec::new(n, 1, ActivationSpec::Tanh, ActivationSpec::Identity).unwrap();
    let id = ConceptId::new(vec![3], n).unwrap();
    let dist = DistributionSpec::standard_gaussian(n).unwrap();
    let train_x = sample(&dist, 2000, 1).unwrap();
    let test_x = sample(&dist, 1000, 2).unwrap();
    let data = Dataset {
        train_y: Array1::from(eval_f_rows(&spec, &id, &train_x).unwrap()),
        test_y: Array1::from(eval_f_rows(&spec, &id, &test_x).unwrap()),
        train_x,
        test_x,
        bayes_01: None,
    };
    let arch = StudentArch {
        hidden_units: 64,
        activation: ActivationSpec::Tanh,
    };
    let cfg = TrainConfig {
        learning_rate: 0.02,
        epochs: 60,
        batch: BatchMode::Minibatch(32),
        init_scale: 1.0,
        seed: 4,
    };
    let r = train(&arch, &data, &cfg, TaskMode::Regression).unwrap();
    let last = r.curves.last().unwrap();
    assert!(last.train_sq_loss < 0.01 && last.test_sq_loss < 0.01, "{last:?}");
}

#[test]
fn bayes_error_of_the_classification_figures_is_informative() {
    for fig in [Figure::Fig1a, Figure::Fig2a] {
        let mut p = preset(fig);
        p.train_size = 10;
        let data = trial_dataset(&p, 0).unwrap();
        let bayes = data.bayes_01.unwrap();
        assert!(bayes > 0.0 && bayes < 0.5, "{}: {bayes}", fig.name());
        assert!(data.test_y.iter().all(|&y| y == 1.0 || y == -1.0));
    }
    let p = preset(Figure::Fig1b);
    assert!(trial_dataset(&p, 0).unwrap().bayes_01.is_none());
}

#[test]
fn bad_configs_are_rejected() {
    let arch = StudentArch {
        hidden_units: 4,
        activation: ActivationSpec::Tanh,
    };
    let x = Array2::zeros((4, 2));
    let data = Dataset {
        train_x: x.clone(),
        train_y: Array1::zeros(4),
        test_x: x,
        test_y: Array1::zeros(3),
        bayes_01: None,
    };
    let cfg = TrainConfig {
        learning_rate: 0.1,
        epochs: 1,
        batch: BatchMode::Full,
        init_scale: 1.0,
        seed: 0,
    };
    assert!(train(&arch, &data, &cfg, TaskMode::Regression).is_err());
    let bad = TrainConfig {
        learning_rate: -1.0,
        ..cfg
    };
    assert!(bad.validate().is_err());
    let json = r#"{"learning_rate": 0.1, "epochs": 3, "seed": 0, "momentum": 0.9}"#;
    assert!(serde_json::from_str::<TrainConfig>(json).is_err());
}
