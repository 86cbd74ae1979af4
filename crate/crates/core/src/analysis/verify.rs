//! Verification suites: each compares an exact or closed-form statement
//! with a Monte-Carlo estimate and reports pass or fail per item.

use rand::seq::index::sample as sample_indices;
use serde::Serialize;

use super::bounds::{truncation_norm_bound, truncation_prob_bound};
use super::moments::{
    anticoncentration_estimate, mc_inner_product, mc_squared_norm, second_moment_g,
    symmetrized_inner_product, truncation_mc, SeriesValue, TruncationEstimate,
};
use crate::activation::ActivationSpec;
use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};
use crate::family::{ConceptId, FamilySpec};
use crate::hermite::{hermite_coeffs_quadrature, HermiteSeries};
use crate::rng::{derive_seed, rng_from_seed};
use crate::stats::{linear_fit, EstimateWithError, LineFit};

/// Monte-Carlo checks use this many standard errors.
pub const SIGMAS: f64 = 4.0;

/// Largest accepted `|symmetrized estimate|` for distinct members.
pub const SYMMETRIZED_TOLERANCE: f64 = 1e-10;

/// Added to Monte-Carlo tolerances. Members with `g ≡ 0` produce values
/// made of roundoff whose spread can be smaller still.
pub const ABSOLUTE_FLOOR: f64 = 1e-12;

/// `count` pairs of distinct members drawn uniformly with `seed`.
pub fn random_concept_pairs(n: usize, k: usize, count: usize, seed: u64) -> Result<Vec<(ConceptId, ConceptId)>> {
    if k == 0 || k >= n {
        return Err(invalid(format!("need 1 <= k < n for distinct pairs, got k={k} n={n}")));
    }
    let mut rng = rng_from_seed(seed);
    let draw = |rng: &mut _| {
        let mut v = sample_indices(rng, n, k).into_vec();
        v.sort_unstable();
        ConceptId::new(v, n)
    };
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let a = draw(&mut rng)?;
        let b = draw(&mut rng)?;
        if a != b {
            out.push((a, b));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairCheck {
    pub a: ConceptId,
    pub b: ConceptId,
    pub symmetrized: EstimateWithError,
    pub mc: EstimateWithError,
    pub symmetrized_ok: bool,
    pub mc_ok: bool,
}

impl PairCheck {
    pub fn passed(&self) -> bool {
        self.symmetrized_ok && self.mc_ok
    }
}

/// Inner products of `pairs` random distinct members: the symmetrized
/// estimate must vanish to roundoff and the plain one must be within
/// [`SIGMAS`] standard errors (plus [`ABSOLUTE_FLOOR`]) of 0.
pub fn verify_orthogonality(
    spec: &FamilySpec,
    dist: &DistributionSpec,
    pairs: usize,
    samples: usize,
    sym_samples: usize,
    seed: u64,
) -> Result<Vec<PairCheck>> {
    spec.validate()?;
    let list = random_concept_pairs(spec.n, spec.k, pairs, derive_seed(seed, "verify/orthogonality/pairs", 0))?;
    list.into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let i = i as u64;
            let symmetrized = symmetrized_inner_product(
                spec,
                &a,
                &b,
                dist,
                sym_samples,
                derive_seed(seed, "verify/orthogonality/sym", i),
            )?;
            let mc = mc_inner_product(spec, &a, &b, dist, samples, derive_seed(seed, "verify/orthogonality/mc", i))?;
            Ok(PairCheck {
                symmetrized_ok: symmetrized.value.abs() <= SYMMETRIZED_TOLERANCE,
                mc_ok: mc.value.abs() <= SIGMAS * mc.stderr + ABSOLUTE_FLOOR,
                a,
                b,
                symmetrized,
                mc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondMomentCheck {
    pub k: usize,
    pub inner: ActivationSpec,
    pub series: SeriesValue,
    pub mc: EstimateWithError,
    /// `|series - mc| <= max(4 stderr, 1% of mc)` plus [`ABSOLUTE_FLOOR`].
    pub agrees: bool,
    /// `series <= mc + 4 stderr` plus [`ABSOLUTE_FLOOR`].
    pub below: bool,
}

impl SecondMomentCheck {
    pub fn passed(&self) -> bool {
        self.agrees && self.below
    }
}

/// Hermite series of the inner activation: the closed form for relu,
/// quadrature otherwise.
pub fn inner_series(inner: &ActivationSpec, d_max: usize, nodes: usize) -> Result<HermiteSeries> {
    match inner {
        ActivationSpec::Relu => Ok(HermiteSeries::relu_closed_form(d_max)),
        other => hermite_coeffs_quadrature(other, d_max, nodes),
    }
}

/// Series value of `E[g²]` up to `d_max` against a Gaussian Monte-Carlo
/// estimate. The family is `n = k` with identity outer activation.
pub fn verify_second_moment(
    k: usize,
    inner: ActivationSpec,
    d_max: usize,
    nodes: usize,
    samples: usize,
    seed: u64,
) -> Result<SecondMomentCheck> {
    let spec = FamilySpec::new(k, k, inner, ActivationSpec::Identity)?;
    let series = second_moment_g(&spec, &inner_series(&inner, d_max, nodes)?, d_max)?;
    let id = ConceptId::new((0..k).collect(), k)?;
    let dist = DistributionSpec::standard_gaussian(k)?;
    let mc = mc_squared_norm(&spec, &id, &dist, samples, derive_seed(seed, "verify/second-moment", k as u64))?;
    let slack = (SIGMAS * mc.stderr).max(0.01 * mc.value.abs()) + ABSOLUTE_FLOOR;
    Ok(SecondMomentCheck {
        k,
        inner,
        agrees: (series.value - mc.value).abs() <= slack,
        below: series.value <= mc.value + SIGMAS * mc.stderr + ABSOLUTE_FLOOR,
        series,
        mc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub k: usize,
    pub t: f64,
    pub norm_bound: f64,
    pub prob_bound: f64,
    pub mc: TruncationEstimate,
    pub norm_ok: bool,
    pub prob_ok: bool,
}

impl TruncationCheck {
    pub fn passed(&self) -> bool {
        self.norm_ok && self.prob_ok
    }
}

/// Both truncation bounds against Monte-Carlo estimates at `(k, t)`.
pub fn verify_truncation(k: usize, t: f64, samples: usize, seed: u64) -> Result<TruncationCheck> {
    let norm_bound = truncation_norm_bound(k, t)?;
    let prob_bound = truncation_prob_bound(k, t)?;
    let mc = truncation_mc(k, t, samples, derive_seed(seed, &format!("verify/truncation/{t}"), k as u64))?;
    Ok(TruncationCheck {
        k,
        t,
        norm_bound,
        prob_bound,
        norm_ok: norm_bound >= mc.norm.value - SIGMAS * mc.norm.stderr,
        prob_ok: prob_bound >= mc.disagreement.value - SIGMAS * mc.disagreement.stderr,
        mc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnticoncentrationRow {
    pub k: usize,
    pub estimate: EstimateWithError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnticoncentrationReport {
    pub rows: Vec<AnticoncentrationRow>,
    /// Fit of `ln P[|g| >= 1]` against `k`; `None` with fewer than two
    /// distinct `k` or a zero estimate.
    pub fit: Option<LineFit>,
}

impl AnticoncentrationReport {
    /// Every estimate is positive and the log-linear slope is finite.
    pub fn passed(&self) -> bool {
        let positive = self.rows.iter().all(|r| r.estimate.value > 0.0);
        let slope_ok = self.rows.len() < 2 || self.fit.is_some_and(|f| f.slope.is_finite());
        positive && slope_ok
    }
}

/// `P[|g(x)| >= 1]` for each `k`, with `n = k`, the concept `{0, ..., k-1}`
/// and Gaussian inputs.
pub fn verify_anticoncentration(
    ks: &[usize],
    inner: ActivationSpec,
    samples: usize,
    seed: u64,
) -> Result<AnticoncentrationReport> {
    if ks.is_empty() {
        return Err(invalid("need at least one k"));
    }
    let rows = ks
        .iter()
        .map(|&k| {
            let spec = FamilySpec::new(k, k, inner, ActivationSpec::Identity)?;
            let id = ConceptId::new((0..k).collect(), k)?;
            let dist = DistributionSpec::standard_gaussian(k)?;
            let estimate =
                anticoncentration_estimate(&spec, &id, &dist, samples, derive_seed(seed, "verify/anticoncentration", k as u64))?;
            Ok(AnticoncentrationRow { k, estimate })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = if rows.iter().all(|r| r.estimate.value > 0.0) {
        let xs: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.estimate.value.ln()).collect();
        linear_fit(&xs, &ys)
    } else {
        None
    };
    Ok(AnticoncentrationReport { rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_distinct_and_reproducible() {
        let a = random_concept_pairs(10, 3, 20, 5).unwrap();
        assert_eq!(a, random_concept_pairs(10, 3, 20, 5).unwrap());
        assert!(a.iter().all(|(s, t)| s != t && s.len() == 3));
        assert!(random_concept_pairs(3, 3, 1, 0).is_err());
    }

    #[test]
    fn small_suites_pass() {
        let spec = FamilySpec::new(6, 2, ActivationSpec::Relu, ActivationSpec::Tanh).unwrap();
        let dist = DistributionSpec::rademacher(6).unwrap();
        let checks = verify_orthogonality(&spec, &dist, 3, 20_000, 200, 1).unwrap();
        assert!(checks.iter().all(PairCheck::passed));
        let sm = verify_second_moment(1, ActivationSpec::Relu, 10, 400, 20_000, 2).unwrap();
        assert_eq!(sm.series.value, 1.0);
        assert!(sm.passed());
        assert!(verify_truncation(3, 2.0, 20_000, 3).unwrap().passed());
        assert!(verify_anticoncentration(&[2, 4], ActivationSpec::Relu, 20_000, 4).unwrap().passed());
    }
}
