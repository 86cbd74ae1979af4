//! Classification loss of p-concepts and its correlation identity.

use std::sync::atomic::{AtomicBool, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};
use crate::family::{eval_g_at, ConceptId, FamilySpec};
use crate::montecarlo::{mc_estimate, mc_estimates_with_rng};
use crate::rng::derive_seed;
use crate::stats::EstimateWithError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroOneLoss {
    /// Frequency of `f(x) != y` with `y` drawn from the p-concept.
    pub direct: EstimateWithError,
    /// `1/2 - ⟨c, f⟩_D / 2` on an independent sample.
    pub identity: EstimateWithError,
}

impl ZeroOneLoss {
    pub fn combined_stderr(&self) -> f64 {
        self.direct.combined_stderr(&self.identity)
    }

    /// `true` when the two estimates differ by at most `sigmas` combined
    /// standard errors.
    pub fn agree(&self, sigmas: f64) -> bool {
        (self.direct.value - self.identity.value).abs() <= sigmas * self.combined_stderr()
    }
}

fn check_pconcept(spec: &FamilySpec, id: &ConceptId, dist: &DistributionSpec) -> Result<()> {
    spec.validate()?;
    id.check(spec)?;
    if dist.dim != spec.n {
        return Err(crate::error::Error::DimensionMismatch {
            expected: spec.n,
            got: dist.dim,
        });
    }
    if !spec.outer.is_conditional_mean() {
        return Err(invalid(format!(
            "p-concept needs an outer activation with range in [-1, 1], got {}",
            spec.outer
        )));
    }
    Ok(())
}

/// 0/1 loss of the classifier `f` (values in {±1}) on the p-concept `f_S`,
/// estimated directly and through the correlation identity. The identity
/// estimate uses `derive_seed(seed, "zero-one/identity", 0)`.
pub fn zero_one_loss<F>(
    spec: &FamilySpec,
    id: &ConceptId,
    f: F,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<ZeroOneLoss>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_pconcept(spec, id, dist)?;
    let bad = AtomicBool::new(false);
    let classify = |x: &[f64]| {
        let v = f(x);
        if v != 1.0 && v != -1.0 {
            bad.store(true, Ordering::Relaxed);
        }
        v
    };
    let c = |x: &[f64]| spec.outer.eval(eval_g_at(&spec.inner, id.indices(), x));
    let direct = mc_estimates_with_rng(dist, n_samples, seed, 1, |x, rng, out| {
        let p = 0.5 * (1.0 + c(x));
        let y = if rng.random::<f64>() < p { 1.0 } else { -1.0 };
        out[0] = if classify(x) != y { 1.0 } else { 0.0 };
    })?[0];
    let corr = mc_estimate(dist, n_samples, derive_seed(seed, "zero-one/identity", 0), |x| c(x) * classify(x))?;
    if bad.load(Ordering::Relaxed) {
        return Err(invalid("classifier output must be +1 or -1"));
    }
    Ok(ZeroOneLoss {
        direct,
        identity: EstimateWithError::new(0.5 - 0.5 * corr.value, 0.5 * corr.stderr, corr.n_samples),
    })
}

/// `1/2 - E_D|f_S(x)| / 2`, the 0/1 loss of `sign(f_S)`.
pub fn bayes_optimal_error(
    spec: &FamilySpec,
    id: &ConceptId,
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
) -> Result<EstimateWithError> {
    check_pconcept(spec, id, dist)?;
    let m = mc_estimate(dist, n_samples, seed, |x| spec.outer.eval(eval_g_at(&spec.inner, id.indices(), x)).abs())?;
    Ok(EstimateWithError::new(0.5 - 0.5 * m.value, 0.5 * m.stderr, m.n_samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationSpec;

    #[test]
    fn perfect_and_random_classifiers() {
        let spec = FamilySpec::new(4, 1, ActivationSpec::Relu, ActivationSpec::Sign).unwrap();
        let id = ConceptId::new(vec![2], 4).unwrap();
        let dist = DistributionSpec::standard_gaussian(4).unwrap();
        let perfect = zero_one_loss(&spec, &id, |x| if x[2] >= 0.0 { 1.0 } else { -1.0 }, &dist, 20_000, 1).unwrap();
        assert_eq!(perfect.direct.value, 0.0);
        assert!(perfect.identity.value.abs() < 1e-12);
        let other = zero_one_loss(&spec, &id, |x| if x[0] >= 0.0 { 1.0 } else { -1.0 }, &dist, 20_000, 1).unwrap();
        assert!((other.direct.value - 0.5).abs() < 0.02);
        assert!(other.agree(4.0));
        assert!(zero_one_loss(&spec, &id, |x| x[0], &dist, 100, 1).is_err());
    }

    #[test]
    fn bayes_error_examples() {
        let dist = DistributionSpec::standard_gaussian(3).unwrap();
        // k = 1 ReLU gives g(x) = x_0, so |sign(g)| = 1 everywhere.
        let one = FamilySpec::new(3, 1, ActivationSpec::Relu, ActivationSpec::Sign).unwrap();
        let id = ConceptId::new(vec![0], 3).unwrap();
        assert_eq!(bayes_optimal_error(&one, &id, &dist, 1000, 1).unwrap().value, 0.0);
        // tanh with even k gives g = 0.
        let zero = FamilySpec::new(3, 2, ActivationSpec::Tanh, ActivationSpec::Tanh).unwrap();
        let pair = ConceptId::new(vec![0, 2], 3).unwrap();
        assert!((bayes_optimal_error(&zero, &pair, &dist, 1000, 1).unwrap().value - 0.5).abs() < 1e-15);
        let unbounded = FamilySpec::new(3, 1, ActivationSpec::Relu, ActivationSpec::Identity).unwrap();
        assert!(bayes_optimal_error(&unbounded, &id, &dist, 1000, 1).is_err());
    }
}
