//! One-hidden-layer student network `h(x) = Σ_i a_i σ(⟨W_i, x⟩ + b_i)`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MLPParams {
    /// Hidden weights, one row per unit.
    pub w: Array2<f64>,
    /// Output weights.
    pub a: Array1<f64>,
    /// Hidden biases.
    pub b: Array1<f64>,
    pub activation: ActivationSpec,
}

impl MLPParams {
    /// All parameters zero.
    pub fn zeros(hidden: usize, input_dim: usize, activation: ActivationSpec) -> Self {
        Self {
            w: Array2::zeros((hidden, input_dim)),
            a: Array1::zeros(hidden),
            b: Array1::zeros(hidden),
            activation,
        }
    }

    /// `W_ij ~ N(0, init_scale² / n)`, `a_i ~ N(0, 1 / m)`, `b = 0`.
    pub fn init(hidden: usize, input_dim: usize, activation: ActivationSpec, init_scale: f64, seed: u64) -> Result<Self> {
        if hidden == 0 || input_dim == 0 {
            return Err(invalid("network dimensions must be positive"));
        }
        if !(init_scale > 0.0 && init_scale.is_finite()) {
            return Err(invalid("init_scale must be positive"));
        }
        let mut rng = rng_from_seed(seed);
        let wn = Normal::new(0.0, init_scale / (input_dim as f64).sqrt()).map_err(|e| invalid(e.to_string()))?;
        let an = Normal::new(0.0, 1.0 / (hidden as f64).sqrt()).map_err(|e| invalid(e.to_string()))?;
        let w = Array2::from_shape_fn((hidden, input_dim), |_| wn.sample(&mut rng));
        let a = Array1::from_shape_fn(hidden, |_| an.sample(&mut rng));
        Ok(Self {
            w,
            a,
            b: Array1::zeros(hidden),
            activation,
        })
    }

    pub fn hidden(&self) -> usize {
        self.a.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    /// `m n + 2 m`.
    pub fn num_params(&self) -> usize {
        self.w.len() + self.a.len() + self.b.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.w.nrows();
        if self.a.len() != m || self.b.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: if self.a.len() != m { self.a.len() } else { self.b.len() },
            });
        }
        if !self.w.iter().chain(&self.a).chain(&self.b).all(|v| v.is_finite()) {
            return Err(invalid("network parameters must be finite"));
        }
        Ok(())
    }

    /// Parameters flattened as `W` (row-major), then `b`, then `a`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.w.iter().chain(&self.b).chain(&self.a).copied().collect()
    }

    /// Inverse of [`MLPParams::to_flat`] with the shape of `self`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let (m, n) = self.w.dim();
        let w = Array2::from_shape_vec((m, n), flat[..m * n].to_vec()).expect("length checked");
        let b = Array1::from_vec(flat[m * n..m * n + m].to_vec());
        let a = Array1::from_vec(flat[m * n + m..].to_vec());
        Ok(Self {
            w,
            a,
            b,
            activation: self.activation,
        })
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Self, scale: f64) {
        self.w.scaled_add(scale, &other.w);
        self.a.scaled_add(scale, &other.a);
        self.b.scaled_add(scale, &other.b);
    }
}

/// `h(x)` for one input.
pub fn forward(p: &MLPParams, x: &[f64]) -> f64 {
    p.w.outer_iter()
        .zip(&p.a)
        .zip(&p.b)
        .map(|((row, &a), &b)| {
            let z = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + b;
            a * p.activation.eval(z)
        })
        .sum()
}

/// Pre-activations `X Wᵀ + b` for a batch.
fn preactivations(p: &MLPParams, xs: &ArrayView2<f64>) -> Array2<f64> {
    let mut z = xs.dot(&p.w.t());
    z += &p.b;
    z
}

/// `h(x)` for every row of `xs`.
pub fn forward_batch(p: &MLPParams, xs: &ArrayView2<f64>) -> Result<Array1<f64>> {
    if xs.ncols() != p.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: p.input_dim(),
            got: xs.ncols(),
        });
    }
    let act = p.activation;
    let hidden = preactivations(p, xs).mapv_into(|z| act.eval(z));
    Ok(hidden.dot(&p.a))
}

/// Gradient of the mean squared loss `(1/N) Σ (h(x_i) - y_i)²` and the loss.
pub fn grad_sq_loss_with_loss(p: &MLPParams, xs: &ArrayView2<f64>, ys: &ArrayView1<f64>) -> Result<(MLPParams, f64)> {
    let n = xs.nrows();
    if n == 0 {
        return Err(invalid("gradient needs a nonempty batch"));
    }
    if ys.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ys.len() });
    }
    if xs.ncols() != p.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: p.input_dim(),
            got: xs.ncols(),
        });
    }
    let act = p.activation;
    let z = preactivations(p, xs);
    let hidden = z.mapv(|v| act.eval(v));
    let h = hidden.dot(&p.a);
    let resid = &h - ys;
    let loss = resid.dot(&resid) / n as f64;
    // r_i = 2 (h_i - y_i) / N
    let r = resid * (2.0 / n as f64);
    let grad_a = hidden.t().dot(&r);
    let mut d = z;
    d.zip_mut_with(&hidden, |zv, &hv| *zv = act.derivative_from_value(*zv, hv));
    for (mut row, &ri) in d.outer_iter_mut().zip(&r) {
        row.zip_mut_with(&p.a, |dv, &a| *dv *= ri * a);
    }
    let grad_b = d.sum_axis(Axis(0));
    let grad_w = d.t().dot(xs);
    Ok((
        MLPParams {
            w: grad_w,
            a: grad_a,
            b: grad_b,
            activation: act,
        },
        loss,
    ))
}

/// Gradient of the mean squared loss over a batch.
pub fn grad_sq_loss(p: &MLPParams, xs: &ArrayView2<f64>, ys: &ArrayView1<f64>) -> Result<MLPParams> {
    Ok(grad_sq_loss_with_loss(p, xs, ys)?.0)
}

/// Mean squared loss over a batch.
pub fn sq_loss(p: &MLPParams, xs: &ArrayView2<f64>, ys: &ArrayView1<f64>) -> Result<f64> {
    let h = forward_batch(p, xs)?;
    if ys.len() != h.len() {
        return Err(Error::DimensionMismatch { expected: h.len(), got: ys.len() });
    }
    Ok(h.iter().zip(ys).map(|(h, y)| (h - y) * (h - y)).sum::<f64>() / h.len() as f64)
}

/// Fraction of rows where `sign(h(x))` (with `sign(0) = +1`) differs from `y`.
pub fn zero_one_error(p: &MLPParams, xs: &ArrayView2<f64>, ys: &ArrayView1<f64>) -> Result<f64> {
    let h = forward_batch(p, xs)?;
    Ok(sign_disagreement(h.as_slice().expect("fresh array"), ys))
}

pub(crate) fn sign_disagreement(h: &[f64], ys: &ArrayView1<f64>) -> f64 {
    let wrong = h
        .iter()
        .zip(ys)
        .filter(|(&h, &y)| (if h >= 0.0 { 1.0 } else { -1.0 }) != y)
        .count();
    wrong as f64 / h.len() as f64
}

/// Writes `∂h/∂θ` at `x` into `out` (flat order of [`MLPParams::to_flat`])
/// and returns `h(x)`.
pub fn param_gradient(p: &MLPParams, x: &[f64], out: &mut [f64]) -> f64 {
    let (m, n) = p.w.dim();
    debug_assert_eq!(out.len(), m * n + 2 * m);
    let (gw, rest) = out.split_at_mut(m * n);
    let (gb, ga) = rest.split_at_mut(m);
    let mut h = 0.0;
    for (i, row) in p.w.outer_iter().enumerate() {
        let z = row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + p.b[i];
        let s = p.activation.eval(z);
        let ds = p.activation.derivative(z) * p.a[i];
        h += p.a[i] * s;
        ga[i] = s;
        gb[i] = ds;
        for (g, &xv) in gw[i * n..(i + 1) * n].iter_mut().zip(x) {
            *g = ds * xv;
        }
    }
    h
}
