//! Distinguishers built from a learner's hypothesis.

use serde::{Deserialize, Serialize};

use super::oracle::Oracle;
use super::query::{ScalarFn, SQQuery};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Labeled,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguisherOutcome {
    pub verdict: Verdict,
    pub response: f64,
    pub threshold: f64,
    /// Conditions the decision relies on that were not checked here.
    pub assumptions: Vec<String>,
}

fn check_eps(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon must be positive"));
    }
    Ok(())
}

/// Issues `h(x, y) = c̃(x) y` and declares the data labeled iff the response
/// exceeds `ε/2`. Requires `τ <= ε/2`.
pub fn distinguisher_from_weak_learner(c_tilde: ScalarFn, oracle: &mut Oracle, epsilon: f64) -> Result<DistinguisherOutcome> {
    check_eps(epsilon)?;
    let tau = oracle.tolerance();
    if tau > epsilon / 2.0 {
        return Err(Error::Precondition(format!(
            "need tau <= epsilon/2, got tau = {tau}, epsilon = {epsilon}"
        )));
    }
    let q = SQQuery::inner_product("weak-learner correlation", move |x| c_tilde(x));
    let response = oracle.answer(&q)?;
    let threshold = epsilon / 2.0;
    Ok(DistinguisherOutcome {
        verdict: if response > threshold {
            Verdict::Labeled
        } else {
            Verdict::Random
        },
        response,
        threshold,
        assumptions: vec![format!("the hypothesis has advantage at least {epsilon} on labeled data")],
    })
}

/// Issues `h(x, y) = c̃(x)²` and declares the data labeled iff the response
/// exceeds `2.5 ε²`, midway between `ε²` and `(2ε)²`. Requires `τ <= ε²`.
pub fn distinguisher_from_l2_learner(c_tilde: ScalarFn, oracle: &mut Oracle, epsilon: f64) -> Result<DistinguisherOutcome> {
    check_eps(epsilon)?;
    let tau = oracle.tolerance();
    if tau > epsilon * epsilon {
        return Err(Error::Precondition(format!(
            "need tau <= epsilon^2, got tau = {tau}, epsilon = {epsilon}"
        )));
    }
    let q = SQQuery::general("l2-learner squared norm", move |x, _| {
        let v = c_tilde(x);
        v * v
    });
    let response = oracle.answer(&q)?;
    let threshold = 2.5 * epsilon * epsilon;
    Ok(DistinguisherOutcome {
        verdict: if response > threshold {
            Verdict::Labeled
        } else {
            Verdict::Random
        },
        response,
        threshold,
        assumptions: vec![
            format!("every concept has norm at least 3*epsilon = {}", 3.0 * epsilon),
            format!("the hypothesis is within {epsilon} of the target in L2"),
        ],
    })
}
