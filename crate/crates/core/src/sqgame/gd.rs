//! Gradient descent on the squared loss expressed through inner-product
//! queries.
//!
//! `∇ E[(h - y)²] = 2 E[h ∇h] - 2 E[y ∇h]`. The first term only involves the
//! known marginal and is computed directly on a fixed sample; each
//! coordinate of the second term is one inner-product query with
//! `g_j = ∂h/∂θ_j`. Coordinates with empirical norm above 1 are divided by
//! their norm before being asked and the answer is multiplied back.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::oracle::Oracle;
use crate::distributions::sample;
use crate::error::{invalid, Error, Result};
use crate::training::{param_gradient, MLPParams, DIVERGENCE_LOSS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GdSqConfig {
    pub steps: usize,
    pub learning_rate: f64,
    /// Size of the marginal sample behind `E[h ∇h]`.
    pub direct_samples: usize,
    pub direct_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdStepRecord {
    pub step: usize,
    /// `E[h²]` on the marginal sample.
    pub direct_sq: f64,
    /// `⟨h, y⟩` assembled from the output-weight answers.
    pub correlation: f64,
    /// `E[h²] - 2 ⟨h, y⟩`, the squared loss up to the constant `E[y²]`.
    pub loss_proxy: f64,
    pub grad_norm: f64,
    pub rescaled_queries: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdSqResult {
    pub params: MLPParams,
    pub trace: Vec<GdStepRecord>,
    pub queries: usize,
}

impl GdSqResult {
    pub fn write_trace_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["step", "direct_sq", "correlation", "loss_proxy", "grad_norm", "rescaled_queries"])?;
        for r in &self.trace {
            w.write_record([
                r.step.to_string(),
                r.direct_sq.to_string(),
                r.correlation.to_string(),
                r.loss_proxy.to_string(),
                r.grad_norm.to_string(),
                r.rescaled_queries.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

const BLOCK_ROWS: usize = 1024;

/// Mean of `h ∇h` and of `(∇h)²` over the rows of `xs`, plus `E[h²]`.
fn direct_terms(p: &MLPParams, xs: &Array2<f64>) -> (Vec<f64>, Vec<f64>, f64) {
    let dim = p.num_params();
    let rows = xs.nrows();
    // Fixed blocks merged in order keep the sums independent of the thread count.
    let blocks: Vec<(Vec<f64>, Vec<f64>, f64)> = (0..rows.div_ceil(BLOCK_ROWS))
        .into_par_iter()
        .map(|b| {
            let (mut hg, mut g2, mut h2) = (vec![0.0; dim], vec![0.0; dim], 0.0);
            let mut buf = vec![0.0; dim];
            let mut x = vec![0.0; xs.ncols()];
            for r in b * BLOCK_ROWS..((b + 1) * BLOCK_ROWS).min(rows) {
                for (xv, v) in x.iter_mut().zip(xs.row(r)) {
                    *xv = *v;
                }
                let h = param_gradient(p, &x, &mut buf);
                for j in 0..dim {
                    hg[j] += h * buf[j];
                    g2[j] += buf[j] * buf[j];
                }
                h2 += h * h;
            }
            (hg, g2, h2)
        })
        .collect();
    let (mut hg, mut g2, mut h2) = (vec![0.0; dim], vec![0.0; dim], 0.0);
    for (a, b, c) in blocks {
        for j in 0..dim {
            hg[j] += a[j];
            g2[j] += b[j];
        }
        h2 += c;
    }
    let inv = 1.0 / rows as f64;
    hg.iter_mut().chain(g2.iter_mut()).for_each(|v| *v *= inv);
    h2 *= inv;
    (hg, g2, h2)
}

/// Runs `cfg.steps` gradient steps from `model`, asking `oracle` for every
/// label-dependent term.
pub fn gd_via_sq(model: &MLPParams, oracle: &mut Oracle, cfg: &GdSqConfig) -> Result<GdSqResult> {
    model.validate()?;
    if !(cfg.learning_rate >= 0.0 && cfg.learning_rate.is_finite()) {
        return Err(invalid("learning rate must be nonnegative"));
    }
    if cfg.direct_samples == 0 {
        return Err(invalid("direct term needs at least one sample"));
    }
    let dist = oracle.config().dist.clone();
    if dist.dim != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: dist.dim,
        });
    }
    let xs = sample(&dist, cfg.direct_samples, cfg.direct_seed)?;
    let dim = model.num_params();
    let m = model.hidden();
    let mut params = model.clone();
    let mut trace = Vec::with_capacity(cfg.steps);
    let start_queries = oracle.queries_answered();
    for step in 0..cfg.steps {
        let (hg, g2, h2) = direct_terms(&params, &xs);
        if !h2.is_finite() || h2 > DIVERGENCE_LOSS {
            return Err(Error::Diverged { step, loss: h2 });
        }
        let scales: Vec<f64> = g2.iter().map(|&s| if s > 1.0 { s.sqrt() } else { 1.0 }).collect();
        let rescaled_queries = scales.iter().filter(|&&s| s != 1.0).count();
        let p = &params;
        let responses = oracle.answer_inner_products(&format!("step {step} gradient"), dim, &scales, |x, out| {
            param_gradient(p, x, out);
        })?;
        // The last m coordinates are the output weights, with ∂h/∂a_i = φ_i.
        let correlation: f64 = params.a.iter().zip(&responses[dim - m..]).map(|(a, r)| a * r).sum();
        let grad: Vec<f64> = hg.iter().zip(&responses).map(|(d, r)| 2.0 * (d - r)).collect();
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let mut flat = params.to_flat();
        for (t, g) in flat.iter_mut().zip(&grad) {
            *t -= cfg.learning_rate * g;
        }
        params = params.with_flat(&flat)?;
        trace.push(GdStepRecord {
            step,
            direct_sq: h2,
            correlation,
            loss_proxy: h2 - 2.0 * correlation,
            grad_norm,
            rescaled_queries,
        });
    }
    Ok(GdSqResult {
        params,
        trace,
        queries: oracle.queries_answered() - start_queries,
    })
}
