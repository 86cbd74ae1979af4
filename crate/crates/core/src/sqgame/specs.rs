//! Query suites described in JSON.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::engine::ExpectationEngine;
use super::query::SQQuery;
use crate::error::{invalid, Result};
use crate::family::{enumerate_family, eval_g_at, ConceptId, FamilySpec};

/// One entry of a query suite file, e.g.
/// `[{"type": "matched-filter", "concept": [0, 1]}, {"type": "monomial", "indices": [2]}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum QuerySpec {
    /// Inner-product query with `g ≈ f_S / ‖f_S‖`.
    MatchedFilter { concept: Vec<usize> },
    /// One matched filter per member of the family, in enumeration order.
    AllMatchedFilters,
    /// Inner-product query with `g(x) = scale · Π_{i ∈ indices} x_i`.
    Monomial {
        indices: Vec<usize>,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// The matched-filter query of concept `id`, scaled by the engine's upper
/// bound on `‖f_S‖` so that its norm stays at most 1.
pub fn matched_filter(spec: &FamilySpec, id: &ConceptId, engine: &ExpectationEngine) -> Result<SQQuery> {
    let sq = engine.squared_norm(spec, id)?;
    let norm = if sq.value > 0.0 { (sq.value + sq.error).sqrt() } else { 0.0 };
    if !(norm > 0.0) {
        return Err(invalid(format!("concept {id} has zero norm; no matched filter")));
    }
    let (s, c) = (*spec, id.clone());
    Ok(SQQuery {
        name: format!("matched-filter {id}"),
        kind: super::query::QueryKind::InnerProduct(Arc::new(move |x: &[f64]| {
            s.outer.eval(eval_g_at(&s.inner, c.indices(), x)) / norm
        })),
        support: Some(id.indices().to_vec()),
    })
}

/// Builds the queries of a suite.
pub fn build_queries(specs: &[QuerySpec], spec: &FamilySpec, engine: &ExpectationEngine) -> Result<Vec<SQQuery>> {
    let mut out = Vec::new();
    for qs in specs {
        match qs {
            QuerySpec::MatchedFilter { concept } => {
                let id = ConceptId::new(concept.clone(), spec.n)?;
                id.check(spec)?;
                out.push(matched_filter(spec, &id, engine)?);
            }
            QuerySpec::AllMatchedFilters => {
                for id in enumerate_family(spec.n, spec.k)? {
                    out.push(matched_filter(spec, &id, engine)?);
                }
            }
            QuerySpec::Monomial { indices, scale } => {
                let id = ConceptId::new(indices.clone(), spec.n)?;
                let (idx, scale) = (id.indices().to_vec(), *scale);
                let name = format!("monomial {id} x {scale}");
                let support = idx.clone();
                out.push(
                    SQQuery::inner_product(name, move |x| scale * idx.iter().map(|&i| x[i]).product::<f64>())
                        .with_support(support),
                );
            }
        }
    }
    Ok(out)
}
