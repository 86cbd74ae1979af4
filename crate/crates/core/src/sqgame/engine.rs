//! Expectations of query-times-concept products for game bookkeeping.
//!
//! `f_S` only reads `x_S`, so when a query declares a small support the
//! product `ĥ(x) f_S(x)` lives on at most a handful of Gaussian coordinates
//! and a tensor Gauss–Hermite rule integrates it. The error estimate is the
//! difference between two rule sizes, which is only trustworthy for smooth
//! integrands: families with a kinked activation (and queries on their
//! support, which are assumed smooth otherwise) use Monte-Carlo averaged
//! over sign flips of the involved coordinates, as does everything else.

use serde::{Deserialize, Serialize};

use super::query::ScalarFn;
use crate::analysis::MAX_SYMMETRIZED_SUPPORT;
use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};
use crate::family::{eval_g_at, ConceptId, FamilySpec};
use crate::montecarlo::mc_estimate;
use crate::quadrature::GaussianRule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub coarse_nodes: usize,
    pub fine_nodes: usize,
    /// Largest number of coordinates integrated by tensor quadrature.
    pub max_tensor_dim: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            coarse_nodes: 20,
            fine_nodes: 28,
            max_tensor_dim: 4,
            mc_samples: 200_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineMethod {
    TensorQuadrature,
    SymmetrizedMc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineValue {
    pub value: f64,
    /// Bound on `|value - truth|` used to decide verdicts: the difference
    /// between two quadrature sizes plus `1e-12`, or four standard errors.
    pub error: f64,
    pub method: EngineMethod,
}

pub struct ExpectationEngine {
    cfg: EngineConfig,
    dist: DistributionSpec,
    coarse: GaussianRule,
    fine: GaussianRule,
}

fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut u: Vec<usize> = a.iter().chain(b).copied().collect();
    u.sort_unstable();
    u.dedup();
    u
}

impl ExpectationEngine {
    pub fn new(dist: DistributionSpec, cfg: EngineConfig) -> Result<Self> {
        dist.validate()?;
        if cfg.coarse_nodes == 0 || cfg.fine_nodes <= cfg.coarse_nodes {
            return Err(invalid("engine needs 0 < coarse_nodes < fine_nodes"));
        }
        if cfg.mc_samples < 2 {
            return Err(invalid("engine needs at least two Monte-Carlo samples"));
        }
        Ok(Self {
            coarse: GaussianRule::gauss_hermite(cfg.coarse_nodes)?,
            fine: GaussianRule::gauss_hermite(cfg.fine_nodes)?,
            cfg,
            dist,
        })
    }

    pub fn dist(&self) -> &DistributionSpec {
        &self.dist
    }

    fn tensor(&self, rule: &GaussianRule, coords: &[usize], f: &dyn Fn(&[f64]) -> f64) -> f64 {
        let d = coords.len();
        let m = rule.len();
        let mut x = vec![0.0; self.dist.dim];
        let mut idx = vec![0usize; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for (j, &c) in coords.iter().enumerate() {
                x[c] = rule.nodes[idx[j]];
                w *= rule.weights[idx[j]];
            }
            total += w * f(&x);
            let mut j = 0;
            loop {
                if j == d {
                    return total;
                }
                idx[j] += 1;
                if idx[j] < m {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }

    /// `E_D[f(x)]` for a function reading only `coords` (all coordinates
    /// when `coords` is `None`). `flip` are the coordinates averaged over
    /// sign flips in the Monte-Carlo fallback.
    /// Tensor quadrature is used only when `smooth` is set.
    pub fn expect(
        &self,
        coords: Option<&[usize]>,
        flip: &[usize],
        smooth: bool,
        f: &(dyn Fn(&[f64]) -> f64 + Sync),
    ) -> Result<EngineValue> {
        if let Some(c) = coords {
            if smooth && self.dist.is_gaussian() && c.len() <= self.cfg.max_tensor_dim {
                let fine = self.tensor(&self.fine, c, f);
                let coarse = self.tensor(&self.coarse, c, f);
                return Ok(EngineValue {
                    value: fine,
                    error: (fine - coarse).abs() + 1e-12,
                    method: EngineMethod::TensorQuadrature,
                });
            }
        }
        if flip.len() > MAX_SYMMETRIZED_SUPPORT {
            return Err(invalid(format!(
                "{} flip coordinates exceed the enumeration limit {MAX_SYMMETRIZED_SUPPORT}",
                flip.len()
            )));
        }
        let flips = 1u64 << flip.len();
        let est = mc_estimate(&self.dist, self.cfg.mc_samples, self.cfg.seed, |x| {
            let mut xz = x.to_vec();
            let mut acc = 0.0;
            for bits in 0..flips {
                for (j, &u) in flip.iter().enumerate() {
                    xz[u] = if (bits >> j) & 1 == 1 { -x[u] } else { x[u] };
                }
                acc += f(&xz);
            }
            acc / flips as f64
        })?;
        Ok(EngineValue {
            value: est.value,
            error: 4.0 * est.stderr,
            method: EngineMethod::SymmetrizedMc,
        })
    }

    /// `⟨ĥ, f_S⟩_D` where `ĥ` reads the coordinates in `support`.
    pub fn correlation(
        &self,
        qhat: &ScalarFn,
        support: Option<&[usize]>,
        spec: &FamilySpec,
        id: &ConceptId,
    ) -> Result<EngineValue> {
        id.check(spec)?;
        let coords = support.map(|s| union(s, id.indices()));
        let flip = coords.clone().unwrap_or_else(|| id.indices().to_vec());
        let flip = if flip.len() > MAX_SYMMETRIZED_SUPPORT {
            id.indices().to_vec()
        } else {
            flip
        };
        let f = |x: &[f64]| qhat(x) * spec.outer.eval(eval_g_at(&spec.inner, id.indices(), x));
        self.expect(coords.as_deref(), &flip, is_smooth(spec), &f)
    }

    /// `‖f_S‖²_D`.
    pub fn squared_norm(&self, spec: &FamilySpec, id: &ConceptId) -> Result<EngineValue> {
        id.check(spec)?;
        let f = |x: &[f64]| {
            let v = spec.outer.eval(eval_g_at(&spec.inner, id.indices(), x));
            v * v
        };
        self.expect(Some(id.indices()), id.indices(), is_smooth(spec), &f)
    }
}

fn is_smooth(spec: &FamilySpec) -> bool {
    spec.inner.breakpoints().is_empty() && spec.outer.breakpoints().is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::ActivationSpec;
    use crate::analysis::mc_squared_norm;
    use std::sync::Arc;

    #[test]
    fn tensor_rule_integrates_polynomials() {
        let e = ExpectationEngine::new(DistributionSpec::standard_gaussian(5).unwrap(), EngineConfig::default()).unwrap();
        let v = e
            .expect(Some(&[1, 3]), &[], true, &|x: &[f64]| x[1] * x[1] * x[3] * x[3] + x[3].powi(4))
            .unwrap();
        assert!((v.value - 4.0).abs() < 1e-12 && v.error < 1e-10);
    }

    #[test]
    fn norm_agrees_with_mc_and_orthogonality_is_exact() {
        let spec = FamilySpec::new(6, 3, ActivationSpec::Tanh, ActivationSpec::Tanh).unwrap();
        let dist = DistributionSpec::standard_gaussian(6).unwrap();
        let e = ExpectationEngine::new(dist.clone(), EngineConfig::default()).unwrap();
        let s = ConceptId::new(vec![0, 1, 2], 6).unwrap();
        let t = ConceptId::new(vec![1, 2, 4], 6).unwrap();
        let n = e.squared_norm(&spec, &s).unwrap();
        assert_eq!(n.method, EngineMethod::TensorQuadrature);
        assert!(n.error < 1e-2, "{n:?}");
        let mc = mc_squared_norm(&spec, &s, &dist, 200_000, 2).unwrap();
        assert!((n.value - mc.value).abs() <= 4.0 * mc.stderr + n.error, "{n:?} {mc:?}");
        let (sp, tt) = (spec, t.clone());
        let qhat: ScalarFn = Arc::new(move |x: &[f64]| sp.outer.eval(eval_g_at(&sp.inner, tt.indices(), x)));
        let c = e.correlation(&qhat, Some(t.indices()), &spec, &s).unwrap();
        assert_eq!(c.method, EngineMethod::TensorQuadrature);
        assert!(c.value.abs() < 1e-14, "{c:?}");
        let same = e.correlation(&qhat, Some(t.indices()), &spec, &t).unwrap();
        assert!((same.value - n.value).abs() < 1e-12);
        let mc_fallback = e.correlation(&qhat, None, &spec, &s).unwrap();
        assert_eq!(mc_fallback.method, EngineMethod::SymmetrizedMc);
        assert!(mc_fallback.value.abs() < 1e-12);
    }

    #[test]
    fn kinked_family_uses_monte_carlo() {
        let spec = FamilySpec::new(4, 2, ActivationSpec::Relu, ActivationSpec::Tanh).unwrap();
        let dist = DistributionSpec::standard_gaussian(4).unwrap();
        let e = ExpectationEngine::new(dist.clone(), EngineConfig::default()).unwrap();
        let s = ConceptId::new(vec![0, 1], 4).unwrap();
        let n = e.squared_norm(&spec, &s).unwrap();
        assert_eq!(n.method, EngineMethod::SymmetrizedMc);
        let mc = mc_squared_norm(&spec, &s, &dist, 400_000, 5).unwrap();
        assert!((n.value - mc.value).abs() <= n.error + 4.0 * mc.stderr);
    }
}
