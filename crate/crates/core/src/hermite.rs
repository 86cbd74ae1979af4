//! Probabilists' Hermite polynomials and Hermite expansions of activations.
//!
//! `H_0 = 1`, `H_1 = x`, `H_{i+1} = x H_i - i H_{i-1}`; the normalized
//! polynomials `H̃_i = H_i / sqrt(i!)` are orthonormal under `N(0, 1)`.

use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::error::{Error, Result};
use crate::quadrature::GaussianRule;

/// Largest expansion degree accepted by [`hermite_coeffs_quadrature`].
/// `sqrt(i!)` leaves the double range shortly after this.
pub const MAX_DEGREE: usize = 300;

/// Default number of Gauss–Hermite nodes.
pub const DEFAULT_NODES: usize = 400;

/// `ln(n!)`.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Evaluates `H_i(x)` (or `H̃_i(x)` when `normalized`).
///
/// Uses the unnormalized recurrence and divides by `sqrt(i!)` computed as
/// `exp(ln(i!) / 2)`. For large `i` and `|x|` the unnormalized value itself
/// can overflow; [`normalized_hermite_all`] is the stable variant used by the
/// quadrature code.
pub fn hermite_eval(i: usize, x: f64, normalized: bool) -> f64 {
    let mut prev = 1.0;
    if i == 0 {
        return 1.0;
    }
    let mut cur = x;
    for j in 1..i {
        let next = x * cur - j as f64 * prev;
        prev = cur;
        cur = next;
    }
    if normalized {
        cur / (0.5 * ln_factorial(i)).exp()
    } else {
        cur
    }
}

/// Fills `out[i] = H̃_i(x)` for `i < out.len()` with the normalized recurrence
/// `H̃_{i+1} = (x H̃_i - sqrt(i) H̃_{i-1}) / sqrt(i+1)`.
pub fn normalized_hermite_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() == 1 {
        return;
    }
    out[1] = x;
    for i in 1..out.len() - 1 {
        let fi = i as f64;
        out[i + 1] = (x * out[i] - fi.sqrt() * out[i - 1]) / (fi + 1.0).sqrt();
    }
}

/// Closed-form normalized Hermite coefficient `c_i` of ReLU:
/// `c_0 = 1/sqrt(2π)`, `c_1 = 1/2`, `c_{odd ≥ 3} = 0` and
/// `c_{2j} = (H_{2j}(0) + 2j H_{2j-2}(0)) / sqrt(2π (2j)!)`.
///
/// Since `H_{2j}(0) = (-1)^j (2j-1)!!`, the numerator collapses to
/// `(-1)^{j+1} (2j-3)!!`, which is evaluated in log space.
pub fn relu_hermite_coeff(i: usize) -> f64 {
    match i {
        0 => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
        1 => 0.5,
        _ if i % 2 == 1 => 0.0,
        _ => {
            let j = i / 2;
            // (2j-3)!! = (2j-2)! / (2^{j-1} (j-1)!)
            let ln_dfact = ln_factorial(2 * j - 2)
                - (j - 1) as f64 * std::f64::consts::LN_2
                - ln_factorial(j - 1);
            let ln_mag = ln_dfact - 0.5 * ((2.0 * std::f64::consts::PI).ln() + ln_factorial(2 * j));
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            sign * ln_mag.exp()
        }
    }
}

/// Coefficients of a function in the normalized Hermite basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteSeries {
    /// `coeffs[i]` multiplies `H̃_i`.
    pub coeffs: Vec<f64>,
    pub activation: ActivationSpec,
}

impl HermiteSeries {
    pub fn max_degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// ReLU coefficients from the closed form (exact zeros at odd degrees ≥ 3).
    pub fn relu_closed_form(max_degree: usize) -> Self {
        Self {
            coeffs: (0..=max_degree).map(relu_hermite_coeff).collect(),
            activation: ActivationSpec::Relu,
        }
    }

    /// `Σ_i coeffs[i]²`, the squared norm of the truncated expansion.
    pub fn squared_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// Evaluates the truncated expansion at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let mut h = vec![0.0; self.coeffs.len()];
        normalized_hermite_all(x, &mut h);
        h.iter().zip(&self.coeffs).map(|(h, c)| h * c).sum()
    }
}

/// Computes `E[act(x) H̃_i(x)]` for `i ≤ max_degree` by quadrature.
///
/// Smooth activations use a `nodes`-point Gauss–Hermite rule; activations
/// with kinks or jumps (relu, truncated relu, sign) use the composite rule of
/// [`GaussianRule::piecewise`], which does not depend on `nodes`.
pub fn hermite_coeffs_quadrature(
    act: &ActivationSpec,
    max_degree: usize,
    nodes: usize,
) -> Result<HermiteSeries> {
    if max_degree > MAX_DEGREE {
        return Err(Error::DegreeOverflow {
            degree: max_degree,
            max: MAX_DEGREE,
        });
    }
    if nodes < 2 * max_degree + 20 {
        return Err(Error::Precondition(format!(
            "need at least 2*{max_degree}+20 quadrature nodes, got {nodes}"
        )));
    }
    let rule = GaussianRule::for_activation(act, nodes)?;
    let mut coeffs = vec![0.0; max_degree + 1];
    let mut h = vec![0.0; max_degree + 1];
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let fw = w * act.eval(x);
        if fw == 0.0 {
            continue;
        }
        normalized_hermite_all(x, &mut h);
        for (c, hi) in coeffs.iter_mut().zip(&h) {
            *c += fw * hi;
        }
    }
    // Polynomials have exactly vanishing higher coefficients.
    if let Some(p) = act.polynomial_degree() {
        for c in coeffs.iter_mut().skip(p + 1) {
            *c = 0.0;
        }
    }
    Ok(HermiteSeries {
        coeffs,
        activation: *act,
    })
}

/// `E[act(x)²]` under `N(0, 1)` by the same quadrature.
pub fn activation_second_moment(act: &ActivationSpec, nodes: usize) -> Result<f64> {
    let rule = GaussianRule::for_activation(act, nodes)?;
    Ok(rule.expect(|x| {
        let v = act.eval(x);
        v * v
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_degree_values() {
        for &x in &[-2.0, 0.0, 0.3, 5.0] {
            assert_eq!(hermite_eval(0, x, false), 1.0);
            assert_eq!(hermite_eval(0, x, true), 1.0);
        }
        assert_eq!(hermite_eval(2, 1.0, false), 0.0);
        assert_eq!(hermite_eval(2, 0.0, false), -1.0);
        assert_eq!(hermite_eval(3, 2.0, false), 2.0);
        assert_abs_diff_eq!(
            hermite_eval(4, 1.5, true),
            (1.5f64.powi(4) - 6.0 * 2.25 + 3.0) / 24f64.sqrt(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn normalized_recurrence_agrees_with_eval() {
        let mut out = vec![0.0; 25];
        for &x in &[-3.1, -0.2, 0.0, 1.7, 4.0] {
            normalized_hermite_all(x, &mut out);
            for (i, v) in out.iter().enumerate() {
                let e = hermite_eval(i, x, true);
                assert!((v - e).abs() <= 1e-10 * e.abs().max(1.0), "i={i} x={x}");
            }
        }
    }

    #[test]
    fn relu_closed_form_values() {
        assert_abs_diff_eq!(
            relu_hermite_coeff(0),
            0.398_942_280_401_432_7,
            epsilon = 1e-15
        );
        assert_eq!(relu_hermite_coeff(1), 0.5);
        assert_eq!(relu_hermite_coeff(3), 0.0);
        assert_eq!(relu_hermite_coeff(17), 0.0);
        assert_abs_diff_eq!(
            relu_hermite_coeff(2),
            0.282_094_791_773_878_1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn relu_closed_form_matches_literal_formula() {
        // (H_{2j}(0) + 2j H_{2j-2}(0)) / sqrt(2π (2j)!) with plain doubles.
        for j in 1..=10usize {
            let num = hermite_eval(2 * j, 0.0, false)
                + (2 * j) as f64 * hermite_eval(2 * j - 2, 0.0, false);
            let literal = num / (2.0 * std::f64::consts::PI * ln_factorial(2 * j).exp()).sqrt();
            assert!(
                (relu_hermite_coeff(2 * j) - literal).abs() <= 1e-13 * literal.abs(),
                "j={j}"
            );
        }
    }

    #[test]
    fn identity_expansion() {
        let s = hermite_coeffs_quadrature(&ActivationSpec::Identity, 5, 200).unwrap();
        let expected = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (c, e) in s.coeffs.iter().zip(expected) {
            assert_abs_diff_eq!(*c, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn sigmoid_structure() {
        let s = hermite_coeffs_quadrature(&ActivationSpec::Sigmoid, 10, 400).unwrap();
        assert_abs_diff_eq!(s.coeffs[0], 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(s.coeffs[2], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(s.coeffs[4], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn relu_quadrature_matches_closed_form() {
        let s = hermite_coeffs_quadrature(&ActivationSpec::Relu, 30, 400).unwrap();
        for (i, c) in s.coeffs.iter().enumerate() {
            assert_abs_diff_eq!(*c, relu_hermite_coeff(i), epsilon = 1e-8);
        }
    }

    #[test]
    fn preconditions() {
        assert!(matches!(
            hermite_coeffs_quadrature(&ActivationSpec::Tanh, 301, 1000),
            Err(Error::DegreeOverflow { .. })
        ));
        assert!(matches!(
            hermite_coeffs_quadrature(&ActivationSpec::Tanh, 30, 50),
            Err(Error::Precondition(_))
        ));
        assert!(hermite_coeffs_quadrature(&ActivationSpec::Tanh, 300, 700).is_ok());
    }

    #[test]
    fn bessel_inequality_for_bounded_activations() {
        for act in [
            ActivationSpec::Sigmoid,
            ActivationSpec::Tanh,
            ActivationSpec::Sign,
            ActivationSpec::TruncatedRelu(2.0),
        ] {
            let total = activation_second_moment(&act, 400).unwrap();
            let s = hermite_coeffs_quadrature(&act, 60, 400).unwrap();
            let mut partial = 0.0;
            for c in &s.coeffs {
                let next = partial + c * c;
                assert!(next >= partial);
                partial = next;
                assert!(partial <= total + 1e-9, "{act}: {partial} > {total}");
            }
        }
    }
}
