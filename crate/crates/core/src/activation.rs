//! Scalar activations used as inner (`phi`) and outer (`psi`) nonlinearities.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error};

/// An activation function together with its declared analytic properties.
///
/// Parsed from and printed as `relu`, `truncated-relu:T`, `sigmoid`, `tanh`,
/// `sign`, `identity` or `constant:c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ActivationSpec {
    Relu,
    /// `min(relu(x), T)`.
    TruncatedRelu(f64),
    /// `1 / (1 + e^{-x})`.
    Sigmoid,
    Tanh,
    /// `+1` for `x >= 0`, `-1` otherwise.
    Sign,
    Identity,
    Constant(f64),
}

impl ActivationSpec {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Self::Relu => x.max(0.0),
            Self::TruncatedRelu(t) => x.max(0.0).min(t),
            Self::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Self::Tanh => x.tanh(),
            Self::Sign => {
                if x >= 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Identity => x,
            Self::Constant(c) => c,
        }
    }

    /// Derivative, taking the right-continuous branch at kinks (0 at the
    /// jump of `sign`).
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::TruncatedRelu(t) => {
                if x > 0.0 && x < t {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Sigmoid => {
                let s = 1.0 / (1.0 + (-x).exp());
                s * (1.0 - s)
            }
            Self::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Self::Sign | Self::Constant(_) => 0.0,
            Self::Identity => 1.0,
        }
    }

    /// Derivative at `x` given `v = self.eval(x)`; avoids a second
    /// transcendental evaluation for sigmoid and tanh.
    #[inline]
    pub fn derivative_from_value(&self, x: f64, v: f64) -> f64 {
        match *self {
            Self::Sigmoid => v * (1.0 - v),
            Self::Tanh => 1.0 - v * v,
            _ => self.derivative(x),
        }
    }

    pub fn is_odd(&self) -> bool {
        matches!(self, Self::Tanh | Self::Sign | Self::Identity)
            || matches!(self, Self::Constant(c) if *c == 0.0)
    }

    /// Closed range of the function, when bounded.
    pub fn range(&self) -> Option<(f64, f64)> {
        match *self {
            Self::Relu | Self::Identity => None,
            Self::TruncatedRelu(t) => Some((0.0, t)),
            Self::Sigmoid => Some((0.0, 1.0)),
            Self::Tanh | Self::Sign => Some((-1.0, 1.0)),
            Self::Constant(c) => Some((c, c)),
        }
    }

    /// `true` when the range lies inside `[-1, 1]`, i.e. the function can
    /// serve as a conditional mean of ±1 labels.
    pub fn is_conditional_mean(&self) -> bool {
        matches!(self.range(), Some((lo, hi)) if lo >= -1.0 && hi <= 1.0)
    }

    /// Points where the function or its derivative is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Relu | Self::Sign => vec![0.0],
            Self::TruncatedRelu(t) => vec![0.0, t],
            _ => Vec::new(),
        }
    }

    /// Polynomial degree when the function is a polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match self {
            Self::Constant(_) => Some(0),
            Self::Identity => Some(1),
            _ => None,
        }
    }
}

impl fmt::Display for ActivationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Relu => write!(f, "relu"),
            Self::TruncatedRelu(t) => write!(f, "truncated-relu:{t}"),
            Self::Sigmoid => write!(f, "sigmoid"),
            Self::Tanh => write!(f, "tanh"),
            Self::Sign => write!(f, "sign"),
            Self::Identity => write!(f, "identity"),
            Self::Constant(c) => write!(f, "constant:{c}"),
        }
    }
}

impl FromStr for ActivationSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s.as_str(), None),
        };
        let number = |what: &str| -> Result<f64, Error> {
            arg.ok_or_else(|| invalid(format!("{what} needs a parameter, e.g. {what}:1")))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("bad {what} parameter: {e}")))
        };
        let act = match name {
            "relu" => Self::Relu,
            "truncated-relu" | "trelu" => {
                let t = number("truncated-relu")?;
                if !(t > 0.0) {
                    return Err(invalid("truncation level must be positive"));
                }
                Self::TruncatedRelu(t)
            }
            "sigmoid" => Self::Sigmoid,
            "tanh" => Self::Tanh,
            "sign" => Self::Sign,
            "identity" | "linear" => Self::Identity,
            "constant" => Self::Constant(number("constant")?),
            other => return Err(invalid(format!("unknown activation '{other}'"))),
        };
        if arg.is_some() && !matches!(act, Self::TruncatedRelu(_) | Self::Constant(_)) {
            return Err(invalid(format!("activation '{name}' takes no parameter")));
        }
        Ok(act)
    }
}

impl TryFrom<String> for ActivationSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ActivationSpec> for String {
    fn from(a: ActivationSpec) -> Self {
        a.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ActivationSpec; 7] = [
        ActivationSpec::Relu,
        ActivationSpec::TruncatedRelu(2.5),
        ActivationSpec::Sigmoid,
        ActivationSpec::Tanh,
        ActivationSpec::Sign,
        ActivationSpec::Identity,
        ActivationSpec::Constant(0.25),
    ];

    #[test]
    fn parse_round_trip() {
        for a in ALL {
            assert_eq!(a.to_string().parse::<ActivationSpec>().unwrap(), a);
        }
        assert!("softplus".parse::<ActivationSpec>().is_err());
        assert!("relu:3".parse::<ActivationSpec>().is_err());
        assert!("truncated-relu:-1".parse::<ActivationSpec>().is_err());
    }

    #[test]
    fn declared_odd_functions_are_odd() {
        for a in ALL.iter().filter(|a| a.is_odd()) {
            for i in 1..200 {
                let x = i as f64 * 0.037;
                assert_eq!(a.eval(-x), -a.eval(x), "{a} at {x}");
            }
        }
    }

    #[test]
    fn declared_ranges_bound_evaluations() {
        for a in ALL {
            if let Some((lo, hi)) = a.range() {
                for i in -400..400 {
                    let v = a.eval(i as f64 * 0.1);
                    assert!(v >= lo && v <= hi, "{a}");
                }
            }
        }
    }

    #[test]
    fn sign_tie_break_is_positive() {
        assert_eq!(ActivationSpec::Sign.eval(0.0), 1.0);
    }

    #[test]
    fn derivatives_match_central_differences_away_from_kinks() {
        for a in ALL {
            for &x in &[-1.3, -0.4, 0.7, 1.9] {
                let h = 1e-6;
                let fd = (a.eval(x + h) - a.eval(x - h)) / (2.0 * h);
                assert!((fd - a.derivative(x)).abs() < 1e-6, "{a} at {x}");
                let d = a.derivative_from_value(x, a.eval(x));
                assert!((d - a.derivative(x)).abs() < 1e-12, "{a} at {x}");
            }
        }
    }
}
