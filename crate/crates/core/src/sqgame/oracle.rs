//! STAT oracles: truthful Monte-Carlo answers and adversarial policies.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::query::{certify_norm, SQQuery};
use crate::distributions::{sample, DistributionSpec};
use crate::error::{invalid, Error, Result};
use crate::family::{eval_f_rows, ConceptId, FamilySpec, LabelMode};
use crate::rng::derive_seed;
use crate::stats::RunningMoments;

/// Samples used to certify query norms when a query is answered.
pub const DEFAULT_CERTIFICATION_SAMPLES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OraclePolicy {
    /// Answers with the empirical mean over a fixed sample of `sample_budget`
    /// points drawn with `seed`.
    TruthfulMc { sample_budget: usize, seed: u64 },
    /// Answers every query with its expectation under the label-free
    /// reference distribution, estimated on a fixed sample.
    AdversaryD0 { sample_budget: usize, seed: u64 },
    /// Answers every query with 0.
    AdversaryZero,
}

/// The labeled distribution the oracle is about.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleTarget {
    Concept {
        spec: FamilySpec,
        concept: ConceptId,
        mode: LabelMode,
    },
    /// Uniform ±1 labels independent of `x`.
    Reference,
    /// `y = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub tolerance: f64,
    pub policy: OraclePolicy,
    pub target: OracleTarget,
    pub dist: DistributionSpec,
    #[serde(default = "default_cert")]
    pub certification_samples: usize,
}

fn default_cert() -> usize {
    DEFAULT_CERTIFICATION_SAMPLES
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid("oracle tolerance must be positive"));
        }
        self.dist.validate()?;
        if let OracleTarget::Concept { spec, concept, mode } = &self.target {
            spec.validate()?;
            concept.check(spec)?;
            if spec.n != self.dist.dim {
                return Err(Error::DimensionMismatch {
                    expected: spec.n,
                    got: self.dist.dim,
                });
            }
            if *mode == LabelMode::PConcept && !spec.outer.is_conditional_mean() {
                return Err(invalid(format!(
                    "p-concept target needs an outer activation with range in [-1, 1], got {}",
                    spec.outer
                )));
            }
        }
        match self.policy {
            OraclePolicy::TruthfulMc { sample_budget, .. } | OraclePolicy::AdversaryD0 { sample_budget, .. }
                if sample_budget < 2 =>
            {
                Err(invalid("oracle sample budget must be at least 2"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryLogEntry {
    pub index: usize,
    pub name: String,
    pub response: f64,
    /// Standard error of the Monte-Carlo answer, when one was computed.
    pub stderr: Option<f64>,
    /// Factor a query was divided by to bring its norm to 1; the response
    /// has already been multiplied back.
    pub rescale: Option<f64>,
}

/// A stateful oracle: owns its sample and logs every answered query.
#[derive(Debug, Clone)]
pub struct Oracle {
    cfg: OracleConfig,
    xs: Option<Array2<f64>>,
    /// `E[y | x]` on the cached sample (concept targets only).
    mean_label: Option<Vec<f64>>,
    log: Vec<QueryLogEntry>,
}

impl Oracle {
    pub fn new(cfg: OracleConfig) -> Result<Self> {
        cfg.validate()?;
        let xs = match cfg.policy {
            OraclePolicy::TruthfulMc { sample_budget, seed } | OraclePolicy::AdversaryD0 { sample_budget, seed } => {
                Some(sample(&cfg.dist, sample_budget, seed)?)
            }
            OraclePolicy::AdversaryZero => None,
        };
        let mean_label = match (&cfg.policy, &cfg.target, &xs) {
            (OraclePolicy::TruthfulMc { .. }, OracleTarget::Concept { spec, concept, .. }, Some(xs)) => {
                Some(eval_f_rows(spec, concept, xs)?)
            }
            _ => None,
        };
        Ok(Self {
            cfg,
            xs,
            mean_label,
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn tolerance(&self) -> f64 {
        self.cfg.tolerance
    }

    pub fn log(&self) -> &[QueryLogEntry] {
        &self.log
    }

    pub fn queries_answered(&self) -> usize {
        self.log.len()
    }

    /// The cached marginal sample, if the policy uses one.
    pub fn sample(&self) -> Option<&Array2<f64>> {
        self.xs.as_ref()
    }

    /// Certifies the query norm, then answers it.
    pub fn answer(&mut self, q: &SQQuery) -> Result<f64> {
        let seed = derive_seed(self.policy_seed(), "oracle/certify", self.log.len() as u64);
        certify_norm(q, &self.cfg.dist, self.cfg.certification_samples, seed)?;
        self.answer_uncertified(q)
    }

    /// Answers a query whose norm the caller has already established.
    pub fn answer_uncertified(&mut self, q: &SQQuery) -> Result<f64> {
        let (response, stderr) = match self.cfg.policy {
            OraclePolicy::AdversaryZero => (0.0, None),
            OraclePolicy::AdversaryD0 { .. } => {
                if q.is_inner_product() {
                    (0.0, None)
                } else {
                    let m = self.mean_over_sample(|x, _| q.label_free_part(x));
                    (m.mean(), Some(m.estimate().stderr))
                }
            }
            OraclePolicy::TruthfulMc { .. } => {
                let m = self.truthful_moments(q)?;
                let stderr = m.estimate().stderr;
                self.check_contract(stderr)?;
                (m.mean(), Some(stderr))
            }
        };
        self.push_log(&q.name, response, stderr, None);
        Ok(response)
    }

    /// Answers the inner-product queries `g_j(x) y / scale_j` for `j < dim`
    /// in one pass over the sample and returns `scale_j` times each response.
    /// `g` fills the values `g_j(x)` for one row.
    pub fn answer_inner_products<F>(&mut self, name: &str, dim: usize, scales: &[f64], g: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64], &mut [f64]) + Sync,
    {
        if scales.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: scales.len(),
            });
        }
        let (values, stderrs): (Vec<f64>, Vec<Option<f64>>) = match self.cfg.policy {
            OraclePolicy::AdversaryZero | OraclePolicy::AdversaryD0 { .. } => (vec![0.0; dim], vec![None; dim]),
            OraclePolicy::TruthfulMc { .. } => match (&self.xs, &self.mean_label) {
                (Some(xs), Some(m)) => {
                    let moments = moments_over_rows(xs, dim, |r, x, out| {
                        g(x, out);
                        for (o, s) in out.iter_mut().zip(scales) {
                            *o *= m[r] / s;
                        }
                    });
                    let mut values = Vec::with_capacity(dim);
                    let mut stderrs = Vec::with_capacity(dim);
                    for mo in &moments {
                        let se = mo.estimate().stderr;
                        self.check_contract(se)?;
                        values.push(mo.mean());
                        stderrs.push(Some(se));
                    }
                    (values, stderrs)
                }
                // Label-free targets have E[y | x] = 0.
                _ => (vec![0.0; dim], vec![Some(0.0); dim]),
            },
        };
        let mut out = Vec::with_capacity(dim);
        for j in 0..dim {
            let v = values[j] * scales[j];
            let rescale = (scales[j] != 1.0).then_some(scales[j]);
            self.push_log(&format!("{name}[{j}]"), v, stderrs[j], rescale);
            out.push(v);
        }
        Ok(out)
    }

    fn policy_seed(&self) -> u64 {
        match self.cfg.policy {
            OraclePolicy::TruthfulMc { seed, .. } | OraclePolicy::AdversaryD0 { seed, .. } => seed,
            OraclePolicy::AdversaryZero => 0,
        }
    }

    fn check_contract(&self, stderr: f64) -> Result<()> {
        if 3.0 * stderr > self.cfg.tolerance {
            return Err(Error::ToleranceContract {
                achieved: 3.0 * stderr,
                tolerance: self.cfg.tolerance,
            });
        }
        Ok(())
    }

    fn push_log(&mut self, name: &str, response: f64, stderr: Option<f64>, rescale: Option<f64>) {
        let index = self.log.len();
        self.log.push(QueryLogEntry {
            index,
            name: name.to_string(),
            response,
            stderr,
            rescale,
        });
    }

    fn mean_over_sample<F>(&self, f: F) -> RunningMoments
    where
        F: Fn(&[f64], usize) -> f64 + Sync,
    {
        let xs = self.xs.as_ref().expect("policy with a sample");
        moments_over_rows(xs, 1, |r, x, out| out[0] = f(x, r))[0]
    }

    fn truthful_moments(&self, q: &SQQuery) -> Result<RunningMoments> {
        Ok(match &self.cfg.target {
            OracleTarget::Concept { mode, .. } => {
                let m = self.mean_label.as_ref().expect("truthful concept oracle");
                match mode {
                    // Exact average over the label given x.
                    LabelMode::PConcept => self.mean_over_sample(|x, r| {
                        let p = 0.5 * (1.0 + m[r]);
                        p * q.eval(x, 1.0) + (1.0 - p) * q.eval(x, -1.0)
                    }),
                    LabelMode::Regression => self.mean_over_sample(|x, r| q.eval(x, m[r])),
                }
            }
            OracleTarget::Reference => self.mean_over_sample(|x, _| q.label_free_part(x)),
            OracleTarget::Zero => self.mean_over_sample(|x, _| q.eval(x, 0.0)),
        })
    }
}

/// Per-output moments of `f(row_index, row, out)` over the rows of `xs`,
/// merged in a fixed order.
fn moments_over_rows<F>(xs: &Array2<f64>, outputs: usize, f: F) -> Vec<RunningMoments>
where
    F: Fn(usize, &[f64], &mut [f64]) + Sync,
{
    const BLOCK: usize = 1024;
    let rows = xs.nrows();
    let blocks: Vec<Vec<RunningMoments>> = (0..rows.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![RunningMoments::new(); outputs];
            let mut out = vec![0.0; outputs];
            for r in b * BLOCK..((b + 1) * BLOCK).min(rows) {
                let row = xs.row(r);
                let owned;
                let x = match row.as_slice() {
                    Some(s) => s,
                    None => {
                        owned = row.to_vec();
                        &owned
                    }
                };
                f(r, x, &mut out);
                for (a, &v) in acc.iter_mut().zip(&out) {
                    a.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![RunningMoments::new(); outputs];
    for b in &blocks {
        for (t, p) in total.iter_mut().zip(b) {
            t.merge(p);
        }
    }
    total
}
