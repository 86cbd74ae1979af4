//! The orthogonal family of one-hidden-layer networks.
//!
//! For an index set `S` of size `k`,
//! `g_S(x) = Σ_{w ∈ {±1}^k} χ(w) φ(⟨w, x_S⟩ / √k)` and `f_S = ψ(g_S)`,
//! a network with `2^k` hidden units and output weights `±1`.
//! Indices are 0-based throughout.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::ActivationSpec;
use crate::error::{invalid, Error, Result};
use crate::rng::{chunk_rng, CHUNK_ROWS};

/// Largest supported mask size.
pub const MAX_K: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub n: usize,
    pub k: usize,
    pub inner: ActivationSpec,
    pub outer: ActivationSpec,
}

impl FamilySpec {
    pub fn new(n: usize, k: usize, inner: ActivationSpec, outer: ActivationSpec) -> Result<Self> {
        let spec = Self { n, k, inner, outer };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.n {
            return Err(invalid(format!(
                "need 1 <= k <= n, got k={} n={}",
                self.k, self.n
            )));
        }
        if self.k > MAX_K {
            return Err(invalid(format!("k={} exceeds the maximum {MAX_K}", self.k)));
        }
        if !self.outer.is_odd() {
            return Err(invalid(format!(
                "outer activation {} is not odd",
                self.outer
            )));
        }
        Ok(())
    }

    /// Number of hidden units, `2^k`.
    pub fn hidden_units(&self) -> usize {
        1 << self.k
    }

    /// Number of members, `C(n, k)`.
    pub fn family_size(&self) -> u128 {
        binomial(self.n, self.k)
    }
}

/// A member of the family, identified by its sorted index set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId {
    indices: Vec<usize>,
}

impl ConceptId {
    /// Validates that `indices` is strictly increasing and below `n`.
    pub fn new(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(invalid("concept index set is empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!(
                "concept indices {indices:?} are not strictly increasing"
            )));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(invalid(format!(
                    "concept index {last} out of range for n={n}"
                )));
            }
        }
        Ok(Self { indices })
    }

    /// Checks the id against a family specification.
    pub fn check(&self, spec: &FamilySpec) -> Result<()> {
        if self.indices.len() != spec.k {
            return Err(invalid(format!(
                "concept has {} indices, family has k={}",
                self.indices.len(),
                spec.k
            )));
        }
        if self.indices.last().is_some_and(|&i| i >= spec.n) {
            return Err(invalid(format!(
                "concept {self} out of range for n={}",
                spec.n
            )));
        }
        Ok(())
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Parses a comma-separated list such as `"0,3,5"`.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let indices = text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| invalid(format!("bad concept index '{t}': {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(indices, n)
    }
}

impl std::fmt::Display for ConceptId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `C(n, k)` as an exact integer.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Product of the entries of a sign vector.
pub fn parity(w: &[i8]) -> Result<i8> {
    let mut p = 1i8;
    for &v in w {
        match v {
            1 => {}
            -1 => p = -p,
            other => return Err(invalid(format!("parity of non-sign entry {other}"))),
        }
    }
    Ok(p)
}

/// `g` evaluated on the already-projected coordinates `xs = x_S`.
///
/// Sign pattern `b ∈ 0..2^k` has `w_j = -1` exactly when bit `j` of `b` is
/// set; patterns are summed in increasing `b`.
pub fn eval_g_projected(inner: &ActivationSpec, xs: &[f64]) -> f64 {
    let k = xs.len();
    let scale = 1.0 / (k as f64).sqrt();
    let mut total = 0.0;
    for b in 0u64..(1u64 << k) {
        let mut dot = 0.0;
        for (j, &v) in xs.iter().enumerate() {
            if (b >> j) & 1 == 1 {
                dot -= v;
            } else {
                dot += v;
            }
        }
        let term = inner.eval(dot * scale);
        if b.count_ones() % 2 == 1 {
            total -= term;
        } else {
            total += term;
        }
    }
    total
}

/// `g` on the coordinates `indices` of a full input row, without validation.
#[inline]
pub fn eval_g_at(inner: &ActivationSpec, indices: &[usize], x: &[f64]) -> f64 {
    let mut buf = [0.0f64; MAX_K];
    for (b, &i) in buf.iter_mut().zip(indices) {
        *b = x[i];
    }
    eval_g_projected(inner, &buf[..indices.len()])
}

fn project(spec: &FamilySpec, id: &ConceptId, x: &[f64], buf: &mut Vec<f64>) -> Result<()> {
    if x.len() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: x.len(),
        });
    }
    id.check(spec)?;
    buf.clear();
    buf.extend(id.indices.iter().map(|&i| x[i]));
    Ok(())
}

/// `g_S(x)` by exact enumeration of the `2^k` sign patterns.
pub fn eval_g(spec: &FamilySpec, id: &ConceptId, x: &[f64]) -> Result<f64> {
    let mut buf = Vec::with_capacity(spec.k);
    project(spec, id, x, &mut buf)?;
    Ok(eval_g_projected(&spec.inner, &buf))
}

/// `f_S(x) = ψ(g_S(x))`.
pub fn eval_f(spec: &FamilySpec, id: &ConceptId, x: &[f64]) -> Result<f64> {
    Ok(spec.outer.eval(eval_g(spec, id, x)?))
}

/// `f_S` for every row of `xs`.
pub fn eval_f_rows(spec: &FamilySpec, id: &ConceptId, xs: &Array2<f64>) -> Result<Vec<f64>> {
    if xs.ncols() != spec.n {
        return Err(Error::DimensionMismatch {
            expected: spec.n,
            got: xs.ncols(),
        });
    }
    id.check(spec)?;
    let rows: Vec<_> = xs.rows().into_iter().collect();
    Ok(rows
        .par_iter()
        .map(|r| {
            let g = match r.as_slice() {
                Some(row) => eval_g_at(&spec.inner, &id.indices, row),
                None => eval_g_at(&spec.inner, &id.indices, &r.to_vec()),
            };
            spec.outer.eval(g)
        })
        .collect())
}

/// All `C(n, k)` index sets in lexicographic order.
pub fn enumerate_family(n: usize, k: usize) -> Result<Vec<ConceptId>> {
    if k > n {
        return Err(invalid(format!("k={k} exceeds n={n}")));
    }
    if k == 0 {
        return Err(invalid("k must be at least 1"));
    }
    let mut out = Vec::with_capacity(binomial(n, k).min(1 << 24) as usize);
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(ConceptId {
            indices: cur.clone(),
        });
        // Advance to the next combination.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < n - k + i {
                break;
            }
            if i == 0 {
                return Ok(out);
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelMode {
    /// `y = f(x)`.
    Regression,
    /// `y ∈ {±1}` with `P[y = 1 | x] = (1 + f(x)) / 2`.
    #[serde(alias = "pconcept")]
    PConcept,
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Self::Regression),
            "pconcept" | "p-concept" => Ok(Self::PConcept),
            other => Err(invalid(format!("unknown label mode '{other}'"))),
        }
    }
}

/// Draws a ±1 label with mean `f`.
#[inline]
pub fn draw_pconcept_label<R: Rng + ?Sized>(rng: &mut R, f: f64) -> f64 {
    let u: f64 = rng.random();
    if u < 0.5 * (1.0 + f) {
        1.0
    } else {
        -1.0
    }
}

/// Labels for each row of `xs`. In p-concept mode row `r` uses chunk
/// `r / CHUNK_ROWS` of `seed`, so labels are reproducible for any thread count.
pub fn sample_labels(
    spec: &FamilySpec,
    id: &ConceptId,
    xs: &Array2<f64>,
    mode: LabelMode,
    seed: u64,
) -> Result<Vec<f64>> {
    if mode == LabelMode::PConcept && !spec.outer.is_conditional_mean() {
        return Err(invalid(format!(
            "p-concept labels need an outer activation with range in [-1, 1], got {}",
            spec.outer
        )));
    }
    let f = eval_f_rows(spec, id, xs)?;
    match mode {
        LabelMode::Regression => Ok(f),
        LabelMode::PConcept => {
            let mut y = f;
            y.par_chunks_mut(CHUNK_ROWS)
                .enumerate()
                .for_each(|(chunk, block)| {
                    let mut rng = chunk_rng(seed, chunk as u64);
                    for v in block.iter_mut() {
                        *v = draw_pconcept_label(&mut rng, *v);
                    }
                });
            Ok(y)
        }
    }
}
