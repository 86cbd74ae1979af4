use std::sync::Arc;

use ndarray::{s, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqhardnet::activation::ActivationSpec;
use sqhardnet::analysis::{mc_squared_norm, sda_lower_bound, SDAParams};
use sqhardnet::distributions::{sample, DistributionSpec};
use sqhardnet::error::Error;
use sqhardnet::family::{enumerate_family, eval_f, eval_f_rows, ConceptId, FamilySpec, LabelMode};
use sqhardnet::montecarlo::{mc_estimate, mc_estimates_with_rng};
use sqhardnet::sqgame::{
    bayes_optimal_error, build_queries, distinguisher_from_l2_learner, distinguisher_from_weak_learner, gd_via_sq,
    h_hat, run_distinguishing_game, zero_one_loss, EngineConfig, ExpectationEngine, GameConfig, GameOutcome,
    GdSqConfig, Oracle, OracleConfig, OraclePolicy, OracleTarget, QuerySpec, SQQuery, ScalarFn, Verdict,
    DEFAULT_CERTIFICATION_SAMPLES,
};
use sqhardnet::training::{forward, train_from, BatchMode, Dataset, MLPParams, TaskMode, TrainConfig};

fn oracle(spec: FamilySpec, target: OracleTarget, policy: OraclePolicy, tolerance: f64) -> Oracle {
    Oracle::new(OracleConfig {
        tolerance,
        policy,
        target,
        dist: DistributionSpec::standard_gaussian(spec.n).unwrap(),
        certification_samples: DEFAULT_CERTIFICATION_SAMPLES,
    })
    .unwrap()
}

fn concept_target(spec: FamilySpec, id: &ConceptId, mode: LabelMode) -> OracleTarget {
    OracleTarget::Concept {
        spec,
        concept: id.clone(),
        mode,
    }
}

#[test]
fn label_advantage_equals_correlation_with_h_hat() {
    let spec = FamilySpec::new(5, 2, ActivationSpec::Relu, ActivationSpec::Tanh).unwrap();
    let id = ConceptId::new(vec![1, 3], 5).unwrap();
    let dist = DistributionSpec::standard_gaussian(5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..6u64 {
        let u: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c = rng.random_range(0.5..2.0);
        let q = SQQuery::general("random", move |x, y| {
            let a: f64 = x.iter().zip(&u).map(|(x, u)| x * u).sum();
            let b: f64 = x.iter().zip(&v).map(|(x, v)| x * v).sum();
            0.5 * (a + y * c * x[1] * x[3]).tanh() + 0.3 * y * b.sin()
        });
        let hq = match &q.kind {
            sqhardnet::sqgame::QueryKind::General(h) => Arc::clone(h),
            _ => unreachable!(),
        };
        // E_{D_c}[h] - E_{D_0}[h] from sampled labels.
        let diff = mc_estimates_with_rng(&dist, 400_000, trial, 1, |x, rng, out| {
            let f = eval_f(&spec, &id, x).unwrap();
            let yc = if rng.random::<f64>() < 0.5 * (1.0 + f) { 1.0 } else { -1.0 };
            let y0 = if rng.random::<bool>() { 1.0 } else { -1.0 };
            out[0] = hq(x, yc) - hq(x, y0);
        })
        .unwrap()[0];
        let hh = h_hat(&q);
        let corr = mc_estimate(&dist, 400_000, 1000 + trial, |x| hh(x) * eval_f(&spec, &id, x).unwrap()).unwrap();
        let se = (diff.stderr.powi(2) + corr.stderr.powi(2)).sqrt();
        assert!((diff.value - corr.value).abs() <= 4.0 * se, "trial {trial}: {diff:?} vs {corr:?}");
    }
}

#[test]
fn game_verdicts_and_ledger_hold() {
    let (n, k, tau) = (6, 2, 0.05);
    let spec = FamilySpec::new(n, k, ActivationSpec::Relu, ActivationSpec::Tanh).unwrap();
    let dist = DistributionSpec::standard_gaussian(n).unwrap();
    let engine = ExpectationEngine::new(
        dist.clone(),
        EngineConfig {
            mc_samples: 20_000,
            seed: 1,
            ..EngineConfig::default()
        },
    )
    .unwrap();
    let class = enumerate_family(n, k).unwrap();
    let specs = [
        QuerySpec::MatchedFilter { concept: vec![0, 1] },
        QuerySpec::Monomial {
            indices: vec![2, 5],
            scale: 1.0,
        },
        QuerySpec::Monomial {
            indices: vec![0],
            scale: 1.0,
        },
        QuerySpec::MatchedFilter { concept: vec![3, 4] },
    ];
    let queries = build_queries(&specs, &spec, &engine).unwrap();
    let t = run_distinguishing_game(
        &class,
        &spec,
        &queries,
        &GameConfig {
            tau,
            adversary_samples: 20_000,
            seed: 2,
        },
        &engine,
    )
    .unwrap();
    assert!(matches!(t.outcome, GameOutcome::Undistinguished { .. }));

    // Re-derive every verdict with an independent engine.
    let check = ExpectationEngine::new(
        dist.clone(),
        EngineConfig {
            mc_samples: 40_000,
            seed: 99,
            ..EngineConfig::default()
        },
    )
    .unwrap();
    let mut previous = 0;
    for (r, q) in t.records.iter().zip(&queries) {
        let qhat: ScalarFn = h_hat(q);
        for (j, c) in class.iter().enumerate() {
            let e = check.correlation(&qhat, q.support.as_deref(), &spec, c).unwrap();
            if r.ruled_out.contains(&j) {
                assert!(e.value.abs() + e.error > tau, "{} rules out {c}: {e:?}", q.name);
            } else {
                assert!(e.value.abs() - e.error <= tau, "{} keeps {c}: {e:?}", q.name);
            }
        }
        assert!(r.cumulative_ruled_out >= previous && r.cumulative_ruled_out <= class.len());
        previous = r.cumulative_ruled_out;
    }
    // The monomial x2 x5 only correlates with f_{2,5}; the odd monomial x0
    // correlates with nothing.
    assert_eq!(t.records[1].ruled_out, vec![class.iter().position(|c| c.indices() == [2, 5]).unwrap()]);
    assert!(t.records[2].ruled_out.is_empty());

    let beta = class
        .iter()
        .map(|c| {
            let e = mc_squared_norm(&spec, c, &dist, 20_000, 5).unwrap();
            e.value + 4.0 * e.stderr
        })
        .fold(0.0, f64::max);
    let d = sda_lower_bound(&SDAParams {
        class_size: class.len() as u64,
        beta,
        gamma: 0.0,
        gamma_prime: tau * tau,
        tau: None,
        epsilon: None,
    })
    .unwrap();
    let budget = class.len() as f64 / d;
    assert!(t.ruled_out_counts().iter().all(|&m| m as f64 <= budget));
    assert!(t.ledger.holds());
}

#[test]
fn distinguishers_separate_labeled_from_random_data() {
    // With k = 1, g(x) = x_0 and f = tanh(x_0), whose squared norm is about 0.394.
    let spec = FamilySpec::new(3, 1, ActivationSpec::Relu, ActivationSpec::Tanh).unwrap();
    let id = ConceptId::new(vec![0], 3).unwrap();
    let policy = OraclePolicy::TruthfulMc {
        sample_budget: 40_000,
        seed: 4,
    };
    let f: ScalarFn = Arc::new(move |x: &[f64]| x[0].tanh());
    let mut labeled = oracle(spec, concept_target(spec, &id, LabelMode::PConcept), policy, 0.05);
    let mut random = oracle(spec, OracleTarget::Reference, policy, 0.05);
    let eps = 0.3;
    assert_eq!(distinguisher_from_weak_learner(f.clone(), &mut labeled, eps).unwrap().verdict, Verdict::Labeled);
    assert_eq!(distinguisher_from_weak_learner(f.clone(), &mut random, eps).unwrap().verdict, Verdict::Random);

    let small: ScalarFn = Arc::new(move |x: &[f64]| 0.1 * x[0].tanh());
    let l2 = distinguisher_from_l2_learner(f.clone(), &mut labeled, eps).unwrap();
    assert_eq!(l2.verdict, Verdict::Labeled);
    assert!((l2.threshold - 2.5 * eps * eps).abs() < 1e-15);
    assert_eq!(distinguisher_from_l2_learner(small, &mut random, eps).unwrap().verdict, Verdict::Random);

    assert!(matches!(
        distinguisher_from_weak_learner(f.clone(), &mut labeled, 0.05),
        Err(Error::Precondition(_))
    ));
    assert!(matches!(distinguisher_from_l2_learner(f, &mut labeled, 0.2), Err(Error::Precondition(_))));
}

#[test]
fn oracle_contracts_are_enforced() {
    let spec = FamilySpec::new(3, 1, ActivationSpec::Relu, ActivationSpec::Tanh).unwrap();
    let id = ConceptId::new(vec![0], 3).unwrap();
    let mut tiny = oracle(
        spec,
        concept_target(spec, &id, LabelMode::PConcept),
        OraclePolicy::TruthfulMc {
            sample_budget: 100,
            seed: 1,
        },
        0.001,
    );
    let q = SQQuery::inner_product("x0 / 2", |x| 0.5 * x[0]);
    assert!(matches!(tiny.answer(&q), Err(Error::ToleranceContract { .. })));
    let big = SQQuery::inner_product("3 x0", |x| 3.0 * x[0]);
    assert!(matches!(tiny.answer(&big), Err(Error::QueryNorm { .. })));

    let mut zero = oracle(spec, concept_target(spec, &id, LabelMode::PConcept), OraclePolicy::AdversaryZero, 0.1);
    assert_eq!(zero.answer(&q).unwrap(), 0.0);
    let mut d0 = oracle(
        spec,
        concept_target(spec, &id, LabelMode::PConcept),
        OraclePolicy::AdversaryD0 {
            sample_budget: 10_000,
            seed: 2,
        },
        0.1,
    );
    assert_eq!(d0.answer(&q).unwrap(), 0.0);
    let label_free = SQQuery::general("x0² / 4", |x, _| 0.25 * x[0] * x[0]);
    assert!((d0.answer(&label_free).unwrap() - 0.25).abs() < 0.02);
    assert_eq!(d0.queries_answered(), 2);
}

#[test]
fn gradient_descent_through_queries_matches_plain_descent() {
    let n = 3;
    let spec = FamilySpec::new(n, 2, ActivationSpec::Relu, ActivationSpec::Identity).unwrap();
    let id = ConceptId::new(vec![0, 2], n).unwrap();
    let (budget, seed, steps, lr) = (8_000, 3, 40, 0.05);
    let model = MLPParams::init(6, n, ActivationSpec::Tanh, 1.0, 17).unwrap();
    let mut o = oracle(
        spec,
        concept_target(spec, &id, LabelMode::Regression),
        OraclePolicy::TruthfulMc {
            sample_budget: budget,
            seed,
        },
        0.05,
    );
    let via = gd_via_sq(
        &model,
        &mut o,
        &GdSqConfig {
            steps,
            learning_rate: lr,
            direct_samples: budget,
            direct_seed: seed,
        },
    )
    .unwrap();
    assert_eq!(via.trace.len(), steps);

    let xs = sample(&DistributionSpec::standard_gaussian(n).unwrap(), budget, seed).unwrap();
    let ys = Array1::from(eval_f_rows(&spec, &id, &xs).unwrap());
    let data = Dataset {
        train_x: xs.clone(),
        train_y: ys.clone(),
        test_x: xs.slice(s![..5, ..]).to_owned(),
        test_y: ys.slice(s![..5]).to_owned(),
        bayes_01: None,
    };
    let cfg = TrainConfig {
        learning_rate: lr,
        epochs: steps,
        batch: BatchMode::Full,
        init_scale: 1.0,
        seed,
    };
    let plain = train_from(model, &data, &cfg, TaskMode::Regression).unwrap();
    let (a, b) = (via.params.to_flat(), plain.params.to_flat());
    let diff: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    assert!(diff / norm <= 1e-3, "relative difference {}", diff / norm);
    // The student learned something, so the comparison is not vacuous.
    let first = plain.curves.records[0].train_sq_loss;
    let last = plain.curves.last().unwrap().train_sq_loss;
    assert!(last < first, "{first} -> {last}");
    assert!(forward(&via.params, &[0.1, 0.2, 0.3]).is_finite());
}

#[test]
fn zero_one_loss_matches_the_correlation_identity() {
    let spec = FamilySpec::new(6, 3, ActivationSpec::Tanh, ActivationSpec::Tanh).unwrap();
    let id = ConceptId::new(vec![0, 2, 5], 6).unwrap();
    let dist = DistributionSpec::standard_gaussian(6).unwrap();
    let sign = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
    let own = zero_one_loss(&spec, &id, |x: &[f64]| sign(eval_f(&spec, &id, x).unwrap()), &dist, 100_000, 1).unwrap();
    let other = zero_one_loss(&spec, &id, |x: &[f64]| sign(x[0] - x[3]), &dist, 100_000, 2).unwrap();
    assert!(own.agree(4.0) && other.agree(4.0), "{own:?} {other:?}");
    let bayes = bayes_optimal_error(&spec, &id, &dist, 100_000, 3).unwrap();
    assert!((bayes.value - own.identity.value).abs() <= 4.0 * (bayes.stderr.powi(2) + own.identity.stderr.powi(2)).sqrt());
    assert!(bayes.value <= other.direct.value + 4.0 * other.direct.stderr);
    assert!(zero_one_loss(&spec, &id, |_: &[f64]| 0.5, &dist, 100, 1).is_err());
}
