//! Statistical queries and their norm certification.

use std::fmt;
use std::sync::Arc;

use crate::distributions::DistributionSpec;
use crate::error::{invalid, Error, Result};
use crate::montecarlo::mc_estimates;
use crate::stats::EstimateWithError;

/// `x ↦ g(x)`.
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `(x, y) ↦ h(x, y)`.
pub type GeneralFn = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum QueryKind {
    General(GeneralFn),
    /// `h(x, y) = g(x) y`.
    InnerProduct(ScalarFn),
}

/// A statistical query together with a name for logs and, optionally, the
/// coordinates it reads.
#[derive(Clone)]
pub struct SQQuery {
    pub name: String,
    pub kind: QueryKind,
    /// Sorted coordinates the query depends on; `None` means all of them.
    pub support: Option<Vec<usize>>,
}

impl fmt::Debug for SQQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            QueryKind::General(_) => "general",
            QueryKind::InnerProduct(_) => "inner-product",
        };
        f.debug_struct("SQQuery")
            .field("name", &self.name)
            .field("kind", &kind)
            .field("support", &self.support)
            .finish()
    }
}

impl SQQuery {
    pub fn general(name: impl Into<String>, h: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            kind: QueryKind::General(Arc::new(h)),
            support: None,
        }
    }

    pub fn inner_product(name: impl Into<String>, g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            kind: QueryKind::InnerProduct(Arc::new(g)),
            support: None,
        }
    }

    /// Declares the coordinates the query reads.
    pub fn with_support(mut self, mut support: Vec<usize>) -> Self {
        support.sort_unstable();
        support.dedup();
        self.support = Some(support);
        self
    }

    pub fn is_inner_product(&self) -> bool {
        matches!(self.kind, QueryKind::InnerProduct(_))
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: f64) -> f64 {
        match &self.kind {
            QueryKind::General(h) => h(x, y),
            QueryKind::InnerProduct(g) => g(x) * y,
        }
    }

    /// `(h(x, 1) + h(x, -1)) / 2`, the part of the query a label-free
    /// distribution sees.
    #[inline]
    pub fn label_free_part(&self, x: &[f64]) -> f64 {
        match &self.kind {
            QueryKind::General(h) => 0.5 * (h(x, 1.0) + h(x, -1.0)),
            QueryKind::InnerProduct(_) => 0.0,
        }
    }

    /// `ĥ(x) = (h(x, 1) - h(x, -1)) / 2`.
    #[inline]
    pub fn label_part(&self, x: &[f64]) -> f64 {
        match &self.kind {
            QueryKind::General(h) => 0.5 * (h(x, 1.0) - h(x, -1.0)),
            QueryKind::InnerProduct(g) => g(x),
        }
    }
}

/// `x ↦ (h(x, 1) - h(x, -1)) / 2`. For an inner-product query this is `g`.
pub fn h_hat(q: &SQQuery) -> ScalarFn {
    match &q.kind {
        QueryKind::General(h) => {
            let h = Arc::clone(h);
            Arc::new(move |x: &[f64]| 0.5 * (h(x, 1.0) - h(x, -1.0)))
        }
        QueryKind::InnerProduct(g) => Arc::clone(g),
    }
}

/// Estimated squared norms `‖h(·, y)‖²_D` for `y = ±1` (a single entry for
/// inner-product queries, `‖g‖²_D`).
#[derive(Debug, Clone, PartialEq)]
pub struct NormCertificate {
    pub squared_norms: Vec<EstimateWithError>,
}

/// Accepts the query when every squared-norm estimate is at most
/// `1 + 3 stderr`; otherwise fails with [`Error::QueryNorm`].
pub fn certify_norm(q: &SQQuery, dist: &DistributionSpec, n_samples: usize, seed: u64) -> Result<NormCertificate> {
    if n_samples < 2 {
        return Err(invalid("norm certification needs at least two samples"));
    }
    let squared_norms = match &q.kind {
        QueryKind::General(h) => mc_estimates(dist, n_samples, seed, 2, |x, out| {
            let a = h(x, 1.0);
            let b = h(x, -1.0);
            out[0] = a * a;
            out[1] = b * b;
        })?,
        QueryKind::InnerProduct(g) => mc_estimates(dist, n_samples, seed, 1, |x, out| {
            let v = g(x);
            out[0] = v * v;
        })?,
    };
    for e in &squared_norms {
        if !(e.value <= 1.0 + 3.0 * e.stderr) {
            return Err(Error::QueryNorm {
                estimate: e.value,
                bound: 1.0,
                stderr: e.stderr,
            });
        }
    }
    Ok(NormCertificate { squared_norms })
}
