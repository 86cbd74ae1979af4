//! Second moments, inner products and anticoncentration of family members.

use ndarray::Array2;
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::combinatorics::{big_ratio, odd_composition_multinomial_sum};
use crate::distributions::DistributionSpec;
use crate::error::{invalid, Error, Result};
use crate::family::{eval_g_at, ConceptId, FamilySpec};
use crate::hermite::HermiteSeries;
use crate::montecarlo::{mc_estimate, mc_estimates};
use crate::rng::{chunk_count, chunk_range, chunk_rng};
use crate::stats::EstimateWithError;

/// Largest `|S ∪ T|` accepted by [`symmetrized_inner_product`].
pub const MAX_SYMMETRIZED_SUPPORT: usize = 26;

/// Partial sum of the Hermite series for `E[g²]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    /// Terms of degree `0..=d_max`.
    pub terms: Vec<f64>,
    /// `true` when degrees above `d_max` can still contribute. Every term is
    /// nonnegative, so `value` is a lower bound in that case.
    pub tail_truncated: bool,
}

/// `E[g(x)²] = 4^k Σ_i φ̂_i² k^{-i} Σ_{odd compositions} (multinomial)` summed
/// up to degree `d_max`.
pub fn second_moment_g(
    spec: &FamilySpec,
    series: &HermiteSeries,
    d_max: usize,
) -> Result<SeriesValue> {
    spec.validate()?;
    if series.activation != spec.inner {
        return Err(invalid(format!(
            "series expands {}, but the family's inner activation is {}",
            series.activation, spec.inner
        )));
    }
    if d_max > series.max_degree() {
        return Err(invalid(format!(
            "d_max = {d_max} exceeds the series degree {}",
            series.max_degree()
        )));
    }
    let k = spec.k as u32;
    let log4k = spec.k as f64 * 4f64.ln();
    let mut terms = Vec::with_capacity(d_max + 1);
    for (i, &c) in series.coeffs.iter().enumerate().take(d_max + 1) {
        let count = odd_composition_multinomial_sum(i as u32, k);
        if c == 0.0 || count.bits() == 0 {
            terms.push(0.0);
            continue;
        }
        // count / k^i <= 1 is formed exactly before rounding.
        let ratio = big_ratio(&count, &BigUint::from(k).pow(i as u32));
        terms.push((log4k + 2.0 * c.abs().ln()).exp() * ratio);
    }
    let tail_truncated = match spec.inner.polynomial_degree() {
        Some(p) => p > d_max,
        None => !(spec.inner == crate::activation::ActivationSpec::Relu && spec.k == 1),
    };
    Ok(SeriesValue {
        value: terms.iter().sum(),
        terms,
        tail_truncated,
    })
}

fn check_pair(
    spec: &FamilySpec,
    a: &ConceptId,
    b: &ConceptId,
    dist: &DistributionSpec,
) -> Result<()> {
    spec.validate()?;
    a.check(spec)?;
    b.check(spec)?;
    dist.validate()?;
    if dist.dim != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: dist.dim,
        });
    }
    Ok(())
}

/// Monte-Carlo estimate of `⟨f_A, f_B⟩_D = E_D[f_A(x) f_B(x)]`.
pub fn mc_inner_product(
    spec: &FamilySpec,
    a: &ConceptId,
    b: &ConceptId,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    check_pair(spec, a, b, dist)?;
    mc_estimate(dist, n_samples, seed, |x| {
        let fa = spec.outer.eval(eval_g_at(&spec.inner, a.indices(), x));
        if a == b {
            return fa * fa;
        }
        fa * spec.outer.eval(eval_g_at(&spec.inner, b.indices(), x))
    })
}

/// Estimate of `⟨f_A, f_B⟩_D` in which every sample is replaced by the
/// average of `f_A(x∘z) f_B(x∘z)` over all sign flips `z` of the coordinates
/// in `A ∪ B`. For `A ≠ B` each per-sample average vanishes up to roundoff.
pub fn symmetrized_inner_product(
    spec: &FamilySpec,
    a: &ConceptId,
    b: &ConceptId,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    check_pair(spec, a, b, dist)?;
    let mut union: Vec<usize> = a.indices().iter().chain(b.indices()).copied().collect();
    union.sort_unstable();
    union.dedup();
    if union.len() > MAX_SYMMETRIZED_SUPPORT {
        return Err(invalid(format!(
            "|S ∪ T| = {} exceeds the enumeration limit {MAX_SYMMETRIZED_SUPPORT}",
            union.len()
        )));
    }
    let flips = 1u64 << union.len();
    mc_estimate(dist, n_samples, seed, |x| {
        let mut xz = x.to_vec();
        let mut acc = 0.0;
        for bits in 0..flips {
            for (j, &u) in union.iter().enumerate() {
                xz[u] = if (bits >> j) & 1 == 1 { -x[u] } else { x[u] };
            }
            let fa = spec.outer.eval(eval_g_at(&spec.inner, a.indices(), &xz));
            let fb = spec.outer.eval(eval_g_at(&spec.inner, b.indices(), &xz));
            acc += fa * fb;
        }
        acc / flips as f64
    })
}

/// Frequency of `|g(x)| >= 1` under a Gaussian input.
pub fn anticoncentration_estimate(
    spec: &FamilySpec,
    id: &ConceptId,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    check_pair(spec, id, id, dist)?;
    if !dist.is_gaussian() {
        return Err(invalid(
            "anticoncentration is defined for the standard Gaussian",
        ));
    }
    mc_estimate(dist, n_samples, seed, |x| {
        if eval_g_at(&spec.inner, id.indices(), x).abs() >= 1.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// Monte-Carlo Gram matrix `G[i][j] ≈ ⟨f_i, f_j⟩_D` for a list of concepts,
/// all entries estimated from one shared sample.
pub fn gram_matrix(
    ids: &[ConceptId],
    spec: &FamilySpec,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    if ids.is_empty() {
        return Err(invalid("concept list is empty"));
    }
    for id in ids {
        check_pair(spec, id, id, dist)?;
    }
    if n_samples == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let m = ids.len();
    let partials: Vec<Array2<f64>> = (0..chunk_count(n_samples))
        .into_par_iter()
        .map(|chunk| {
            let (start, end) = chunk_range(n_samples, chunk);
            let mut rng = chunk_rng(seed, chunk as u64);
            let mut row = vec![0.0; spec.n];
            let mut f = Array2::<f64>::zeros((end - start, m));
            for r in 0..end - start {
                dist.fill_row(&mut rng, &mut row);
                for (j, id) in ids.iter().enumerate() {
                    f[[r, j]] = spec.outer.eval(eval_g_at(&spec.inner, id.indices(), &row));
                }
            }
            f.t().dot(&f)
        })
        .collect();
    let mut gram = Array2::<f64>::zeros((m, m));
    for p in &partials {
        gram += p;
    }
    gram /= n_samples as f64;
    Ok(gram)
}

/// `(1/|C|²) Σ_{c, c'} |⟨c, c'⟩_D|` over ordered pairs, diagonal included.
pub fn average_correlation(
    ids: &[ConceptId],
    spec: &FamilySpec,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let gram = gram_matrix(ids, spec, dist, n_samples, seed)?;
    let m = ids.len() as f64;
    Ok(gram.iter().map(|v| v.abs()).sum::<f64>() / (m * m))
}

/// Monte-Carlo `‖g - g^T‖` and `P[g ≠ g^T]` for the ReLU family with mask
/// size `k`, where `g^T` uses `min(relu, T)` in place of relu.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationEstimate {
    /// Estimate of the norm; its error is propagated from the squared norm.
    pub norm: EstimateWithError,
    pub squared_norm: EstimateWithError,
    pub disagreement: EstimateWithError,
}

pub fn truncation_mc(k: usize, t: f64, n_samples: usize, seed: u64) -> Result<TruncationEstimate> {
    if !(t > 0.0) {
        return Err(invalid("truncation level must be positive"));
    }
    if k == 0 || k > crate::family::MAX_K {
        return Err(invalid(format!("k = {k} out of range")));
    }
    let dist = DistributionSpec::standard_gaussian(k)?;
    let scale = 1.0 / (k as f64).sqrt();
    let est = mc_estimates(&dist, n_samples, seed, 2, |x, out| {
        // Both networks share the pre-activations; only the capped units differ.
        let mut diff = 0.0;
        for b in 0u64..(1u64 << k) {
            let mut dot = 0.0;
            for (j, &v) in x.iter().enumerate() {
                if (b >> j) & 1 == 1 {
                    dot -= v;
                } else {
                    dot += v;
                }
            }
            let u = dot * scale;
            if u > t {
                let excess = u - t;
                if b.count_ones() % 2 == 1 {
                    diff -= excess;
                } else {
                    diff += excess;
                }
            }
        }
        out[0] = diff * diff;
        out[1] = if diff != 0.0 { 1.0 } else { 0.0 };
    })?;
    let sq = est[0];
    let norm_value = sq.value.max(0.0).sqrt();
    let norm_stderr = if norm_value > 0.0 {
        sq.stderr / (2.0 * norm_value)
    } else {
        sq.stderr.sqrt()
    };
    Ok(TruncationEstimate {
        norm: EstimateWithError::new(norm_value, norm_stderr, sq.n_samples),
        squared_norm: sq,
        disagreement: est[1],
    })
}

/// Monte-Carlo `‖f_S‖²_D`.
pub fn mc_squared_norm(
    spec: &FamilySpec,
    id: &ConceptId,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    mc_inner_product(spec, id, id, dist, n_samples, seed)
}
