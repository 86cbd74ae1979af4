//! Quadrature rules for expectations under the standard normal distribution.
//!
//! A [`GaussianRule`] is a set of nodes and weights with
//! `E_{x~N(0,1)}[f(x)] ≈ Σ w_i f(x_i)`. Two constructions are provided:
//!
//! * Gauss–Hermite with weight `e^{-t²}` and the substitution `x = √2 t`.
//!   Geometric convergence for analytic integrands (sigmoid, tanh, ...).
//! * Composite Gauss–Legendre on `[-L, L]` split at the breakpoints of a
//!   piecewise-smooth integrand, with the normal density folded into the
//!   weights. Gauss–Hermite converges only algebraically across a kink
//!   (about `4e-4` absolute error on the ReLU coefficients at 400 nodes), so
//!   kinked activations use this rule instead.

use std::f64::consts::PI;

use crate::activation::ActivationSpec;
use crate::error::{invalid, Result};

const NEWTON_EPS: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;
const RESCALE: f64 = 1e100;

/// Half-width of the truncated real line used by the composite rule. The
/// Gaussian tail mass beyond it is below `1e-120`.
pub const PIECEWISE_HALF_WIDTH: f64 = 24.0;
const PANEL_WIDTH: f64 = 0.25;
const PANEL_ORDER: usize = 20;

/// Eigenvalues of the symmetric tridiagonal matrix with zero diagonal and
/// off-diagonal `off` (implicit QL with Wilkinson shifts), sorted ascending.
fn tridiagonal_eigenvalues(off: &[f64]) -> Result<Vec<f64>> {
    let n = off.len() + 1;
    let mut d = vec![0.0f64; n];
    let mut e = off.to_vec();
    e.push(0.0);
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(invalid("tridiagonal eigenvalue iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Orthonormal Hermite values `(p_n(z), p_{n-1}(z))` for weight `e^{-t²}`,
/// scaled by `e^{-log_scale}`; returns the scaled pair and `log_scale`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64, f64) {
    let (mut p1, mut p2) = (PI.powf(-0.25), 0.0);
    let mut log_scale = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        // The polynomials grow like e^{z²/2}; keep them in range.
        if p1.abs() > RESCALE {
            p1 /= RESCALE;
            p2 /= RESCALE;
            log_scale += RESCALE.ln();
        }
    }
    (p1, p2, log_scale)
}

/// Nodes and weights for `∫ e^{-t²} f(t) dt` over the real line, nodes in
/// decreasing order.
///
/// Nodes are the eigenvalues of the Jacobi matrix, polished by Newton steps
/// on the orthonormal recurrence; weights are `2 / (p_n'(t))²` evaluated in
/// log space.
pub fn gauss_hermite(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("Gauss-Hermite rule needs at least one node"));
    }
    let off: Vec<f64> = (1..n).map(|i| (i as f64 / 2.0).sqrt()).collect();
    let eig = tridiagonal_eigenvalues(&off)?;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = if n % 2 == 1 && i == m - 1 {
            0.0
        } else {
            eig[n - 1 - i]
        };
        let mut pp = 1.0;
        let mut log_scale = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p1, p2, ls) = hermite_pair(n, z);
            pp = (2.0 * nf).sqrt() * p2;
            log_scale = ls;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 * (-2.0 * (pp.abs().ln() + log_scale)).exp();
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    Ok((x, w))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(invalid("Gauss-Legendre rule needs at least one node"));
    }
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

/// A quadrature rule for expectations under `N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussianRule {
    /// `n`-point Gauss–Hermite rule rescaled to the standard normal.
    pub fn gauss_hermite(n: usize) -> Result<Self> {
        let (t, w) = gauss_hermite(n)?;
        let s = PI.sqrt();
        Ok(Self {
            nodes: t.iter().map(|t| std::f64::consts::SQRT_2 * t).collect(),
            weights: w.iter().map(|w| w / s).collect(),
        })
    }

    /// Composite Gauss–Legendre rule on `[-L, L]` whose panels never straddle
    /// a breakpoint.
    pub fn piecewise(breakpoints: &[f64]) -> Result<Self> {
        let l = PIECEWISE_HALF_WIDTH;
        let mut cuts: Vec<f64> = vec![-l];
        let mut inner: Vec<f64> = breakpoints
            .iter()
            .copied()
            .filter(|b| b.abs() < l)
            .collect();
        inner.sort_by(f64::total_cmp);
        inner.dedup();
        cuts.extend(inner);
        cuts.push(l);
        let (gx, gw) = gauss_legendre(PANEL_ORDER)?;
        let norm = 1.0 / (2.0 * PI).sqrt();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for seg in cuts.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let panels = ((b - a) / PANEL_WIDTH).ceil().max(1.0) as usize;
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + p as f64 * h;
                let mid = lo + 0.5 * h;
                for (&t, &wt) in gx.iter().zip(&gw) {
                    let x = mid + 0.5 * h * t;
                    nodes.push(x);
                    weights.push(0.5 * h * wt * norm * (-0.5 * x * x).exp());
                }
            }
        }
        Ok(Self { nodes, weights })
    }

    /// Picks Gauss–Hermite with `nodes` points for smooth activations and the
    /// composite rule for activations with kinks or jumps.
    pub fn for_activation(act: &ActivationSpec, nodes: usize) -> Result<Self> {
        let bps = act.breakpoints();
        if bps.is_empty() {
            Self::gauss_hermite(nodes)
        } else {
            Self::piecewise(&bps)
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}
