use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sqhardnet::analysis::{
    query_count_bound, sda_lower_bound, verify_anticoncentration, verify_orthogonality, verify_second_moment,
    verify_truncation, SDAParams,
};
use sqhardnet::distributions::{sample, DistributionSpec};
use sqhardnet::error::Error;
use sqhardnet::family::{binomial, enumerate_family, sample_labels, ConceptId, FamilySpec, LabelMode};
use sqhardnet::hermite::hermite_coeffs_quadrature;
use sqhardnet::io::{fmt_f64, write_coefficients_csv, write_samples_csv};
use sqhardnet::rng::derive_seed;
use sqhardnet::sqgame::{
    build_queries, gd_via_sq, run_distinguishing_game, EngineConfig, ExpectationEngine, GameConfig, GameOutcome,
    GdSqConfig, Oracle, OracleConfig, OraclePolicy, OracleTarget, QuerySpec,
};
use sqhardnet::training::{
    reproduce_figure, run_trial, write_trials_csv, Figure, FigurePreset, GapCriteria, MLPParams, ReproduceOptions,
    StudentArch,
};

use crate::args::*;
use crate::manifest::{self, dir_of};

/// Exit status for an error: 2 for bad input, 1 for failures at run time.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.downcast_ref::<Error>() {
        return match err {
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Precondition(_)
            | Error::DegreeOverflow { .. }
            | Error::Json(_) => 2,
            _ => 1,
        };
    }
    if e.downcast_ref::<serde_json::Error>().is_some() {
        return 2;
    }
    1
}

/// Runs the command; `Ok(false)` means a check failed.
pub fn run(cli: &Cli, argv: &[String]) -> Result<bool> {
    match &cli.command {
        Command::Hermite(a) => hermite(a, argv),
        Command::GenData(a) => gen_data(a, argv),
        Command::Verify(VerifyCommand::Orthogonality(a)) => orthogonality(a, argv),
        Command::Verify(VerifyCommand::SecondMoment(a)) => second_moment(a, argv),
        Command::Verify(VerifyCommand::Truncation(a)) => truncation(a, argv),
        Command::Verify(VerifyCommand::Anticoncentration(a)) => anticoncentration(a, argv),
        Command::Bounds(BoundsCommand::Sda(a)) => sda(a, argv),
        Command::SqGame(a) => sq_game(a, argv),
        Command::GdSq(a) => gd_sq(a, argv),
        Command::Train(a) => train(a, argv),
        Command::Reproduce(a) => reproduce(a, argv),
    }
}

fn distribution(d: DistArg, dim: usize) -> sqhardnet::error::Result<DistributionSpec> {
    match d {
        DistArg::Gaussian => DistributionSpec::standard_gaussian(dim),
        DistArg::Rademacher => DistributionSpec::rademacher(dim),
        DistArg::ScaleMixture => DistributionSpec::default_mixture(dim),
    }
}

fn family(f: &FamilyArgs) -> sqhardnet::error::Result<FamilySpec> {
    FamilySpec::new(f.n, f.k, f.inner, f.outer)
}

fn create_parent(path: &Path) -> Result<()> {
    std::fs::create_dir_all(dir_of(path)).with_context(|| format!("creating the directory of {}", path.display()))
}

fn status(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Short decimal form without trailing zeros, e.g. `11.4`.
fn short(v: f64) -> String {
    let s = format!("{v:.10}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn hermite(a: &HermiteArgs, argv: &[String]) -> Result<bool> {
    let series = hermite_coeffs_quadrature(&a.activation, a.degree, a.nodes)?;
    create_parent(&a.out)?;
    write_coefficients_csv(&a.out, &series)?;
    manifest::write(dir_of(&a.out), "hermite", argv, a)?;
    println!(
        "{}: {} coefficients, sum of squares {:.12} -> {}",
        a.activation,
        series.coeffs.len(),
        series.squared_norm(),
        a.out.display()
    );
    Ok(true)
}

#[derive(Serialize)]
struct ConceptFile<'a> {
    family: &'a FamilySpec,
    concept: &'a ConceptId,
    mode: LabelMode,
    distribution: &'a DistributionSpec,
    seed: u64,
}

fn gen_data(a: &GenDataArgs, argv: &[String]) -> Result<bool> {
    let spec = family(&a.family)?;
    let id = match &a.concept {
        Some(text) => ConceptId::parse(text, spec.n)?,
        None => ConceptId::new((0..spec.k).collect(), spec.n)?,
    };
    id.check(&spec)?;
    let dist = distribution(a.distribution, spec.n)?;
    std::fs::create_dir_all(&a.out)?;
    for (name, count) in [("train", a.train), ("test", a.test)] {
        let xs = sample(&dist, count, derive_seed(a.seed, &format!("gen-data/{name}-x"), 0))?;
        let ys = sample_labels(&spec, &id, &xs, a.mode, derive_seed(a.seed, &format!("gen-data/{name}-y"), 0))?;
        write_samples_csv(&a.out.join(format!("{name}.csv")), &xs, Some(&ys))?;
    }
    let meta = ConceptFile {
        family: &spec,
        concept: &id,
        mode: a.mode,
        distribution: &dist,
        seed: a.seed,
    };
    std::fs::write(a.out.join("concept.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    manifest::write(&a.out, "gen-data", argv, a)?;
    println!("concept {id}: {} train and {} test rows -> {}", a.train, a.test, a.out.display());
    Ok(true)
}

fn orthogonality(a: &OrthogonalityArgs, argv: &[String]) -> Result<bool> {
    let spec = family(&a.family)?;
    let dist = distribution(a.distribution, spec.n)?;
    let checks = verify_orthogonality(&spec, &dist, a.pairs, a.samples, a.sym_samples, a.seed)?;
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record([
        "pair", "concept_a", "concept_b", "symmetrized", "symmetrized_stderr", "mc", "mc_stderr", "passed",
    ])?;
    for (i, c) in checks.iter().enumerate() {
        w.write_record([
            i.to_string(),
            c.a.to_string(),
            c.b.to_string(),
            fmt_f64(c.symmetrized.value),
            fmt_f64(c.symmetrized.stderr),
            fmt_f64(c.mc.value),
            fmt_f64(c.mc.stderr),
            c.passed().to_string(),
        ])?;
    }
    w.flush()?;
    manifest::write(dir_of(&a.out), "verify orthogonality", argv, a)?;
    let max_sym = checks.iter().map(|c| c.symmetrized.value.abs()).fold(0.0, f64::max);
    let max_z = checks
        .iter()
        .map(|c| c.mc.value.abs() / c.mc.stderr.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let ok = checks.iter().all(|c| c.passed());
    println!(
        "orthogonality ({}, {}/{}, n={}, k={}): {} pairs, max |symmetrized| = {:.3e}, max |mc|/stderr = {:.2} -> {}",
        dist.name(),
        spec.inner,
        spec.outer,
        spec.n,
        spec.k,
        checks.len(),
        max_sym,
        max_z,
        status(ok)
    );
    Ok(ok)
}

fn second_moment(a: &SecondMomentArgs, argv: &[String]) -> Result<bool> {
    let c = verify_second_moment(a.k, a.inner, a.d_max, a.nodes, a.samples, a.seed)?;
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["degree", "term"])?;
    for (i, t) in c.series.terms.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*t)])?;
    }
    w.flush()?;
    manifest::write(dir_of(&a.out), "verify second-moment", argv, a)?;
    println!(
        "E[g^2] ({}, k={}): series {:.10} (tail truncated: {}), mc {:.6} +- {:.2e} -> {}",
        a.inner,
        a.k,
        c.series.value,
        c.series.tail_truncated,
        c.mc.value,
        c.mc.stderr,
        status(c.passed())
    );
    Ok(c.passed())
}

fn truncation(a: &TruncationArgs, argv: &[String]) -> Result<bool> {
    if a.k.len() != a.t.len() {
        return Err(Error::InvalidArgument(format!(
            "--k has {} entries but --t has {}",
            a.k.len(),
            a.t.len()
        ))
        .into());
    }
    let checks = a
        .k
        .iter()
        .zip(&a.t)
        .map(|(&k, &t)| verify_truncation(k, t, a.samples, a.seed))
        .collect::<sqhardnet::error::Result<Vec<_>>>()?;
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record([
        "k", "t", "norm_bound", "norm_mc", "norm_stderr", "prob_bound", "prob_mc", "prob_stderr", "passed",
    ])?;
    for c in &checks {
        w.write_record([
            c.k.to_string(),
            c.t.to_string(),
            fmt_f64(c.norm_bound),
            fmt_f64(c.mc.norm.value),
            fmt_f64(c.mc.norm.stderr),
            fmt_f64(c.prob_bound),
            fmt_f64(c.mc.disagreement.value),
            fmt_f64(c.mc.disagreement.stderr),
            c.passed().to_string(),
        ])?;
    }
    w.flush()?;
    manifest::write(dir_of(&a.out), "verify truncation", argv, a)?;
    for c in &checks {
        println!(
            "k={} T={}: ||g - g^T|| {:.3e} <= {:.3e}, P[g != g^T] {:.3e} <= {:.3e} -> {}",
            c.k,
            c.t,
            c.mc.norm.value,
            c.norm_bound,
            c.mc.disagreement.value,
            c.prob_bound,
            status(c.passed())
        );
    }
    Ok(checks.iter().all(|c| c.passed()))
}

fn anticoncentration(a: &AnticoncentrationArgs, argv: &[String]) -> Result<bool> {
    let r = verify_anticoncentration(&a.k, a.inner, a.samples, a.seed)?;
    create_parent(&a.out)?;
    let mut w = csv::Writer::from_path(&a.out)?;
    w.write_record(["k", "estimate", "stderr", "log_estimate"])?;
    for row in &r.rows {
        w.write_record([
            row.k.to_string(),
            fmt_f64(row.estimate.value),
            fmt_f64(row.estimate.stderr),
            fmt_f64(row.estimate.value.ln()),
        ])?;
    }
    w.flush()?;
    manifest::write(dir_of(&a.out), "verify anticoncentration", argv, a)?;
    for row in &r.rows {
        println!("k={}: P[|g| >= 1] = {:.6} +- {:.2e}", row.k, row.estimate.value, row.estimate.stderr);
    }
    match r.fit {
        Some(f) => println!("log-linear slope {:.4} (R^2 {:.3}) -> {}", f.slope, f.r_squared, status(r.passed())),
        None => println!("no slope -> {}", status(r.passed())),
    }
    Ok(r.passed())
}

#[derive(Serialize)]
struct SdaReport {
    params: SDAParams,
    d: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    queries: Option<u64>,
    assumptions: Vec<String>,
}

fn sda(a: &SdaArgs, argv: &[String]) -> Result<bool> {
    let class_size = match (a.n, a.k, a.class_size) {
        (Some(n), Some(k), _) => {
            if k == 0 || k > n {
                return Err(Error::InvalidArgument(format!("need 1 <= k <= n, got k={k} n={n}")).into());
            }
            u64::try_from(binomial(n, k)).context("class size does not fit in 64 bits")?
        }
        (_, _, Some(c)) => c,
        _ => bail!(Error::InvalidArgument("give --n and --k or --class-size".into())),
    };
    let params = SDAParams {
        class_size,
        beta: a.beta,
        gamma: a.gamma,
        gamma_prime: a.gamma_prime,
        tau: a.tau,
        epsilon: a.epsilon,
    };
    let d = sda_lower_bound(&params)?;
    println!("|C| = {class_size}");
    println!("d = {}", short(d));
    let mut report = SdaReport {
        params,
        d,
        queries: None,
        assumptions: Vec::new(),
    };
    if let Some(mode) = a.mode {
        let q = query_count_bound(&params, mode)?;
        println!("queries >= {}", q.queries);
        for s in &q.assumptions {
            println!("assuming {s}");
        }
        report.queries = Some(q.queries);
        report.assumptions = q.assumptions;
    }
    create_parent(&a.out)?;
    std::fs::write(&a.out, serde_json::to_string_pretty(&report)? + "\n")?;
    manifest::write(dir_of(&a.out), "bounds sda", argv, a)?;
    Ok(true)
}

fn sq_game(a: &SqGameArgs, argv: &[String]) -> Result<bool> {
    let spec = FamilySpec::new(a.n, a.k, a.inner, a.outer)?;
    let dist = distribution(a.distribution, spec.n)?;
    let text = std::fs::read_to_string(&a.queries).with_context(|| format!("reading {}", a.queries.display()))?;
    let specs: Vec<QuerySpec> = serde_json::from_str(&text).map_err(Error::from)?;
    let engine = ExpectationEngine::new(
        dist,
        EngineConfig {
            mc_samples: a.engine_samples,
            seed: derive_seed(a.seed, "sq-game/engine", 0),
            ..EngineConfig::default()
        },
    )?;
    let queries = build_queries(&specs, &spec, &engine)?;
    let class = enumerate_family(spec.n, spec.k)?;
    let cfg = GameConfig {
        tau: a.tau,
        adversary_samples: a.adversary_samples,
        seed: derive_seed(a.seed, "sq-game/adversary", 0),
    };
    let t = run_distinguishing_game(&class, &spec, &queries, &cfg, &engine)?;
    create_parent(&a.out)?;
    t.write_csv(&a.out)?;
    manifest::write(dir_of(&a.out), "sq-game", argv, a)?;
    let l = &t.ledger;
    println!("|C| = {}, tau = {}, {} queries", class.len(), a.tau, t.records.len());
    println!(
        "ruled out per query: max {} (|C|/d = {:.3}), total {}",
        l.max_ruled_out,
        class.len() as f64 / l.d,
        l.sum_ruled_out
    );
    match &t.outcome {
        GameOutcome::Distinguished => println!("outcome: every concept ruled out"),
        GameOutcome::Undistinguished { consistent } => {
            println!("outcome: {} concepts still consistent with the answers", consistent.len())
        }
    }
    println!(
        "ledger: beta = {:.6}, d = {:.3}, per-query bound {}, coverage {} -> {}",
        l.beta,
        l.d,
        status(l.per_query_bound_holds),
        status(l.coverage_holds),
        status(l.holds())
    );
    Ok(l.holds())
}

fn regression() -> LabelMode {
    LabelMode::Regression
}

fn one() -> f64 {
    1.0
}

/// JSON experiment file of `gd-sq`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdSqFile {
    pub target: FamilySpec,
    /// 0-based indices of the target concept.
    pub concept: Vec<usize>,
    #[serde(default = "regression")]
    pub mode: LabelMode,
    #[serde(default)]
    pub distribution: Option<DistributionSpec>,
    pub student: StudentArch,
    #[serde(default = "one")]
    pub init_scale: f64,
    /// Starts from zero output weights, so the student is identically 0.
    #[serde(default)]
    pub zero_output_init: bool,
    pub tolerance: f64,
    pub sample_budget: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

#[derive(Serialize)]
struct GdSqManifest<'a> {
    oracle: OracleArg,
    experiment: &'a GdSqFile,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(Error::from)
        .with_context(|| format!("parsing {}", path.display()))
}

fn gd_sq(a: &GdSqArgs, argv: &[String]) -> Result<bool> {
    let f: GdSqFile = read_json(&a.config)?;
    f.target.validate()?;
    let id = ConceptId::new(f.concept.clone(), f.target.n)?;
    id.check(&f.target)?;
    let dist = match &f.distribution {
        Some(d) => {
            d.validate()?;
            d.clone()
        }
        None => DistributionSpec::standard_gaussian(f.target.n)?,
    };
    let sample_seed = derive_seed(f.seed, "gd-sq/sample", 0);
    let policy = match a.oracle {
        OracleArg::Truthful => OraclePolicy::TruthfulMc {
            sample_budget: f.sample_budget,
            seed: sample_seed,
        },
        OracleArg::D0 => OraclePolicy::AdversaryD0 {
            sample_budget: f.sample_budget,
            seed: sample_seed,
        },
        OracleArg::Zero => OraclePolicy::AdversaryZero,
    };
    let mut oracle = Oracle::new(OracleConfig {
        tolerance: f.tolerance,
        policy,
        target: OracleTarget::Concept {
            spec: f.target,
            concept: id,
            mode: f.mode,
        },
        dist,
        certification_samples: sqhardnet::sqgame::DEFAULT_CERTIFICATION_SAMPLES,
    })?;
    let mut model = MLPParams::init(
        f.student.hidden_units,
        f.target.n,
        f.student.activation,
        f.init_scale,
        derive_seed(f.seed, "gd-sq/init", 0),
    )?;
    if f.zero_output_init {
        model.a.fill(0.0);
    }
    let cfg = GdSqConfig {
        steps: f.steps,
        learning_rate: f.learning_rate,
        direct_samples: f.sample_budget,
        direct_seed: sample_seed,
    };
    let result = gd_via_sq(&model, &mut oracle, &cfg)?;
    create_parent(&a.out)?;
    result.write_trace_csv(&a.out)?;
    manifest::write(
        dir_of(&a.out),
        "gd-sq",
        argv,
        &GdSqManifest {
            oracle: a.oracle,
            experiment: &f,
        },
    )?;
    let last = result.trace.last();
    println!(
        "{} steps, {} queries; final <h, y> = {}, E[h^2] = {}",
        result.trace.len(),
        result.queries,
        last.map(|r| format!("{:.6}", r.correlation)).unwrap_or_else(|| "-".into()),
        last.map(|r| format!("{:.6}", r.direct_sq)).unwrap_or_else(|| "-".into()),
    );
    Ok(true)
}

/// JSON experiment file of `train`.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub experiment: FigurePreset,
    pub seed: u64,
}

fn train(a: &TrainArgs, argv: &[String]) -> Result<bool> {
    let mut f: TrainFile = read_json(&a.config)?;
    if let Some(e) = a.epochs {
        f.experiment.epochs = e;
    }
    let curves = run_trial(&f.experiment, f.seed)?;
    create_parent(&a.out)?;
    write_trials_csv(&a.out, std::slice::from_ref(&curves))?;
    manifest::write(dir_of(&a.out), "train", argv, &f)?;
    if let Some(r) = curves.last() {
        let mut line = format!(
            "epoch {}: train sq {:.6}, test sq {:.6}",
            r.epoch, r.train_sq_loss, r.test_sq_loss
        );
        if let (Some(tr), Some(te)) = (r.train_01, r.test_01) {
            line += &format!(", train 0/1 {tr:.4}, test 0/1 {te:.4}");
        }
        println!("{line}");
    }
    Ok(true)
}

#[derive(Serialize)]
struct ReproduceManifest<'a> {
    args: &'a ReproduceArgs,
    presets: Vec<FigurePreset>,
    trial_seeds: Vec<(Figure, Vec<u64>)>,
}

fn reproduce(a: &ReproduceArgs, argv: &[String]) -> Result<bool> {
    let figures: Vec<Figure> = match a.figure {
        FigureArg::Fig1a => vec![Figure::Fig1a],
        FigureArg::Fig1b => vec![Figure::Fig1b],
        FigureArg::Fig2a => vec![Figure::Fig2a],
        FigureArg::Fig2b => vec![Figure::Fig2b],
        FigureArg::All => Figure::ALL.to_vec(),
    };
    let opts = ReproduceOptions {
        trials: a.trials,
        master_seed: a.seed,
        epochs: a.epochs,
        criteria: Some(GapCriteria {
            train01_max: a.train01_max,
            test01_min: a.test01_min,
            gap01_min: a.gap01_min,
            train_sq_max: a.train_sq_max,
            test_sq_ratio_min: a.test_sq_ratio_min,
        }),
    };
    std::fs::create_dir_all(&a.out)?;
    let mut all_ok = true;
    let mut seeds = Vec::new();
    let mut presets = Vec::new();
    let stdout = std::io::stdout();
    for fig in figures {
        let report = reproduce_figure(fig, &opts, Some(&a.out))?;
        let mut out = stdout.lock();
        writeln!(out, "{} ({} trials):", fig.name(), report.trials)?;
        for c in &report.checks {
            writeln!(
                out,
                "  {:<44} {:>10.4} vs {:>8.4}  {}",
                c.name,
                c.value,
                c.threshold,
                status(c.passed)
            )?;
        }
        all_ok &= report.passed();
        let mut p = sqhardnet::training::preset(fig);
        if let Some(e) = a.epochs {
            p.epochs = e;
        }
        presets.push(p);
        seeds.push((fig, report.seeds));
    }
    manifest::write(
        &a.out,
        "reproduce",
        argv,
        &ReproduceManifest {
            args: a,
            presets,
            trial_seeds: seeds,
        },
    )?;
    println!("{}", status(all_ok));
    Ok(all_ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_trims_zeros() {
        assert_eq!(short(11.4), "11.4");
        assert_eq!(short(1140.0 * 0.01), "11.4");
        assert_eq!(short(3.0), "3");
        assert_eq!(short(-0.0), "0");
    }

    #[test]
    fn errors_map_to_exit_codes() {
        let usage: anyhow::Error = Error::InvalidArgument("x".into()).into();
        assert_eq!(exit_code(&usage), 2);
        let runtime: anyhow::Error = Error::Diverged { step: 1, loss: 1e7 }.into();
        assert_eq!(exit_code(&runtime), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("io")), 1);
    }
}
