//! The distinguishing game against the reference-answering adversary.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::ExpectationEngine;
use super::oracle::{Oracle, OracleConfig, OraclePolicy, OracleTarget};
use super::query::{h_hat, SQQuery};
use crate::analysis::{sda_lower_bound, SDAParams};
use crate::error::{invalid, Error, Result};
use crate::family::{ConceptId, FamilySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameRecord {
    pub query_index: usize,
    pub query_name: String,
    pub response: f64,
    /// `⟨ĥ_k, c⟩_D` for every concept of the class.
    pub correlations: Vec<f64>,
    /// Indices into the class of the concepts this query rules out.
    pub ruled_out: Vec<usize>,
    pub cumulative_ruled_out: usize,
}

impl GameRecord {
    pub fn ruled_out_count(&self) -> usize {
        self.ruled_out.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "outcome")]
pub enum GameOutcome {
    /// Every concept was ruled out, so the answers are inconsistent with
    /// every labeled distribution.
    Distinguished,
    /// Some concepts remain consistent with all answers.
    Undistinguished { consistent: Vec<ConceptId> },
}

/// The counting argument checked on the transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerCheck {
    /// Largest squared concept norm.
    pub beta: f64,
    pub d: f64,
    pub max_ruled_out: usize,
    /// `max_k |S_k| * d <= |C|`.
    pub per_query_bound_holds: bool,
    pub sum_ruled_out: usize,
    /// When every concept is ruled out, `Σ_k |S_k| >= |C|`.
    pub coverage_holds: bool,
}

impl LedgerCheck {
    pub fn holds(&self) -> bool {
        self.per_query_bound_holds && self.coverage_holds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameTranscript {
    pub class: Vec<ConceptId>,
    pub tau: f64,
    pub records: Vec<GameRecord>,
    pub outcome: GameOutcome,
    pub ledger: LedgerCheck,
}

impl GameTranscript {
    pub fn ruled_out_counts(&self) -> Vec<usize> {
        self.records.iter().map(GameRecord::ruled_out_count).collect()
    }

    /// CSV with columns `query_index,response,ruled_out_count,cumulative_ruled_out`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["query_index", "response", "ruled_out_count", "cumulative_ruled_out"])?;
        for r in &self.records {
            w.write_record([
                r.query_index.to_string(),
                r.response.to_string(),
                r.ruled_out_count().to_string(),
                r.cumulative_ruled_out.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub tau: f64,
    /// Samples behind the adversary's answers to general queries.
    pub adversary_samples: usize,
    pub seed: u64,
}

/// Plays the queries against the adversary that answers every query with
/// its expectation under the reference distribution.
///
/// After query `k` the concepts with `|⟨ĥ_k, c⟩_D| > τ` are ruled out. A
/// verdict closer to `τ` than the engine's error bound is an error. The
/// ledger uses `d = |C| τ² / β` (pairwise correlation 0, slack `τ²`).
pub fn run_distinguishing_game(
    class: &[ConceptId],
    spec: &FamilySpec,
    queries: &[SQQuery],
    cfg: &GameConfig,
    engine: &ExpectationEngine,
) -> Result<GameTranscript> {
    spec.validate()?;
    if class.is_empty() {
        return Err(invalid("the concept class is empty"));
    }
    if !(cfg.tau > 0.0) {
        return Err(invalid("tau must be positive"));
    }
    if engine.dist().dim != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: engine.dist().dim,
        });
    }
    for c in class {
        c.check(spec)?;
    }
    let norms = class
        .par_iter()
        .map(|c| engine.squared_norm(spec, c))
        .collect::<Result<Vec<_>>>()?;
    let beta = norms.iter().map(|n| n.value + n.error).fold(0.0, f64::max);
    let mut oracle = Oracle::new(OracleConfig {
        tolerance: cfg.tau,
        policy: OraclePolicy::AdversaryD0 {
            sample_budget: cfg.adversary_samples,
            seed: cfg.seed,
        },
        target: OracleTarget::Reference,
        dist: engine.dist().clone(),
        certification_samples: super::oracle::DEFAULT_CERTIFICATION_SAMPLES,
    })?;
    let mut out_of_play = vec![false; class.len()];
    let mut records = Vec::with_capacity(queries.len());
    for (k, q) in queries.iter().enumerate() {
        let response = oracle.answer(q)?;
        let hh = h_hat(q);
        let values = class
            .par_iter()
            .map(|c| engine.correlation(&hh, q.support.as_deref(), spec, c))
            .collect::<Result<Vec<_>>>()?;
        let mut ruled_out = Vec::new();
        for (i, v) in values.iter().enumerate() {
            if (v.value.abs() - cfg.tau).abs() <= v.error {
                return Err(Error::EnginePrecision {
                    concept: i,
                    value: v.value.abs(),
                    tau: cfg.tau,
                    error: v.error,
                });
            }
            if v.value.abs() > cfg.tau {
                ruled_out.push(i);
                out_of_play[i] = true;
            }
        }
        records.push(GameRecord {
            query_index: k,
            query_name: q.name.clone(),
            response,
            correlations: values.iter().map(|v| v.value).collect(),
            ruled_out,
            cumulative_ruled_out: out_of_play.iter().filter(|&&b| b).count(),
        });
    }
    let consistent: Vec<ConceptId> = class
        .iter()
        .zip(&out_of_play)
        .filter(|(_, &o)| !o)
        .map(|(c, _)| c.clone())
        .collect();
    let outcome = if consistent.is_empty() {
        GameOutcome::Distinguished
    } else {
        GameOutcome::Undistinguished { consistent }
    };
    let d = sda_lower_bound(&SDAParams {
        class_size: class.len() as u64,
        beta,
        gamma: 0.0,
        gamma_prime: cfg.tau * cfg.tau,
        tau: Some(cfg.tau),
        epsilon: None,
    })?;
    let max_ruled_out = records.iter().map(GameRecord::ruled_out_count).max().unwrap_or(0);
    let sum_ruled_out: usize = records.iter().map(GameRecord::ruled_out_count).sum();
    let ledger = LedgerCheck {
        beta,
        d,
        max_ruled_out,
        per_query_bound_holds: max_ruled_out as f64 * d <= class.len() as f64,
        sum_ruled_out,
        coverage_holds: outcome != GameOutcome::Distinguished || sum_ruled_out >= class.len(),
    };
    Ok(GameTranscript {
        class: class.to_vec(),
        tau: cfg.tau,
        records,
        outcome,
        ledger,
    })
}
