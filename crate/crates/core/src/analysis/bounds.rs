//! Closed-form norm, truncation and statistical-dimension bounds.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hermite::{ln_factorial, relu_hermite_coeff};

/// `4^k c_k² k! / k^k`, the single degree-`k` term of the second-moment
/// series for the ReLU family. Defined for even `k >= 2`; for odd `k >= 3`
/// the ReLU coefficient `c_k` vanishes and there is no bound of this form.
pub fn norm_lower_bound_relu(k: usize) -> Result<f64> {
    if k < 2 || k % 2 == 1 {
        return Err(invalid(format!(
            "the ReLU norm bound needs an even k >= 2, got {k}"
        )));
    }
    let c = relu_hermite_coeff(k);
    let kf = k as f64;
    Ok((kf * 4f64.ln() + 2.0 * c.abs().ln() + ln_factorial(k) - kf * kf.ln()).exp())
}

/// `2^k e^{-T²/4} sqrt(T² + 1 - T/sqrt(2π))`, a bound on `‖g - g^T‖`.
pub fn truncation_norm_bound(k: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("truncation level must be positive"));
    }
    let inner = t * t + 1.0 - t / (2.0 * std::f64::consts::PI).sqrt();
    Ok(2f64.powi(k as i32) * (-t * t / 4.0).exp() * inner.sqrt())
}

/// `2^k e^{-T²/2}`, a bound on `P[g(x) ≠ g^T(x)]`.
pub fn truncation_prob_bound(k: usize, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(invalid("truncation level must be positive"));
    }
    Ok(2f64.powi(k as i32) * (-t * t / 2.0).exp())
}

/// Parameters of the statistical-dimension-on-average bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SDAParams {
    /// `|C|`.
    pub class_size: u64,
    /// Bound on squared norms.
    pub beta: f64,
    /// Bound on pairwise correlations.
    pub gamma: f64,
    /// Slack added to `gamma`.
    pub gamma_prime: f64,
    /// Query tolerance.
    #[serde(default)]
    pub tau: Option<f64>,
    /// Target error or advantage.
    #[serde(default)]
    pub epsilon: Option<f64>,
}

impl SDAParams {
    pub fn validate(&self) -> Result<()> {
        if self.class_size == 0 {
            return Err(invalid("class size must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid(format!(
                "gamma = {} must be nonnegative",
                self.gamma
            )));
        }
        if !(self.beta > self.gamma) {
            return Err(Error::Precondition(format!(
                "beta = {} must exceed gamma = {}",
                self.beta, self.gamma
            )));
        }
        if !(self.gamma_prime > 0.0) {
            return Err(invalid(format!(
                "gamma' = {} must be positive",
                self.gamma_prime
            )));
        }
        for (name, v) in [("tau", self.tau), ("epsilon", self.epsilon)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return Err(invalid(format!("{name} = {v} must be positive")));
                }
            }
        }
        Ok(())
    }
}

/// `d = |C| γ' / (β - γ)`.
pub fn sda_lower_bound(p: &SDAParams) -> Result<f64> {
    p.validate()?;
    Ok(p.class_size as f64 * p.gamma_prime / (p.beta - p.gamma))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryMode {
    /// Learning to squared error `ε` (distinguisher query `c̃(x)²`).
    L2,
    /// Weak learning with advantage `ε` (distinguisher query `c̃(x) y`).
    Weak,
    /// Real-valued queries answered against the zero function.
    RealValued,
}

impl std::str::FromStr for QueryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2" => Ok(Self::L2),
            "weak" => Ok(Self::Weak),
            "real-valued" | "real" => Ok(Self::RealValued),
            other => Err(invalid(format!("unknown query mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryBound {
    pub d: f64,
    pub queries: u64,
    /// Preconditions the bound relies on but that cannot be checked from the
    /// parameters alone.
    pub assumptions: Vec<String>,
}

/// Minimum number of queries of tolerance `τ`: `floor(d) - 1` for the
/// learning modes and `floor(d / 2)` for real-valued queries.
pub fn query_count_bound(p: &SDAParams, mode: QueryMode) -> Result<QueryBound> {
    let d = sda_lower_bound(p)?;
    let tau = p
        .tau
        .ok_or_else(|| invalid("query bounds need a tolerance tau"))?;
    let mut assumptions = Vec::new();
    let need_eps = || p.epsilon.ok_or_else(|| invalid("this mode needs epsilon"));
    let queries = match mode {
        QueryMode::Weak => {
            let eps = need_eps()?;
            if tau > eps / 2.0 {
                return Err(Error::Precondition(format!(
                    "weak mode needs tau <= epsilon/2, got tau = {tau}, epsilon = {eps}"
                )));
            }
            (d.floor() as u64).saturating_sub(1)
        }
        QueryMode::L2 => {
            let eps = need_eps()?;
            if tau > eps * eps {
                return Err(Error::Precondition(format!(
                    "l2 mode needs tau <= epsilon^2, got tau = {tau}, epsilon = {eps}"
                )));
            }
            assumptions.push(format!(
                "every concept has norm at least 3*epsilon = {}",
                3.0 * eps
            ));
            (d.floor() as u64).saturating_sub(1)
        }
        QueryMode::RealValued => {
            let expected = (p.gamma + p.gamma_prime).sqrt();
            if (tau - expected).abs() > 1e-12 * expected.max(1.0) {
                return Err(Error::Precondition(format!(
                    "real-valued mode needs tau = sqrt(gamma + gamma') = {expected}, got {tau}"
                )));
            }
            (d / 2.0).floor() as u64
        }
    };
    Ok(QueryBound {
        d,
        queries,
        assumptions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(class_size: u64, beta: f64, gamma: f64, gamma_prime: f64) -> SDAParams {
        SDAParams {
            class_size,
            beta,
            gamma,
            gamma_prime,
            tau: None,
            epsilon: None,
        }
    }

    #[test]
    fn relu_norm_bound_k2() {
        // 16 * (1/(4π)) * 2 / 4
        let expected = 16.0 / (4.0 * PI) * 0.5;
        assert!((norm_lower_bound_relu(2).unwrap() - expected).abs() < 1e-14);
        assert!((expected - 2.0 / PI).abs() < 1e-15);
        assert!(norm_lower_bound_relu(3).is_err());
        assert!(norm_lower_bound_relu(0).is_err());
    }

    #[test]
    fn truncation_bounds() {
        let direct = 128.0 * (-9f64).exp() * (37.0 - 6.0 / (2.0 * PI).sqrt()).sqrt();
        assert!((truncation_norm_bound(7, 6.0).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 0.0929).abs() < 5e-5);
        assert!((truncation_prob_bound(7, 6.0).unwrap() - 128.0 * (-18f64).exp()).abs() < 1e-20);
        let mut prev = f64::INFINITY;
        for i in 0..200 {
            let t = 2.0 + i as f64 * 0.05;
            let b = truncation_norm_bound(5, t).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!(truncation_prob_bound(3, 60.0).unwrap() < 1e-300);
        assert!(truncation_norm_bound(3, 0.0).is_err());
    }

    #[test]
    fn sda_values() {
        assert!((sda_lower_bound(&params(1140, 1.0, 0.0, 0.01)).unwrap() - 11.4).abs() < 1e-12);
        assert_eq!(sda_lower_bound(&params(28, 0.8, 0.3, 0.5)).unwrap(), 28.0);
        assert!(sda_lower_bound(&params(10, 0.5, 0.5, 0.1)).is_err());
    }

    #[test]
    fn query_counts() {
        let mut p = params(1140, 1.0, 0.0, 0.01);
        p.tau = Some(0.05);
        p.epsilon = Some(0.1);
        assert_eq!(query_count_bound(&p, QueryMode::Weak).unwrap().queries, 10);
        p.tau = Some(0.1);
        assert_eq!(
            query_count_bound(&p, QueryMode::RealValued)
                .unwrap()
                .queries,
            5
        );
        p.tau = Some(0.06);
        assert!(query_count_bound(&p, QueryMode::Weak).is_err());
        assert!(query_count_bound(&p, QueryMode::RealValued).is_err());
        p.tau = Some(0.02);
        assert!(query_count_bound(&p, QueryMode::L2).is_err());
    }
}
