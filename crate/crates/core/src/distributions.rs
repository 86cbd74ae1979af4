//! Sign-symmetric input distributions.
//!
//! All three kinds are invariant under `x -> x ∘ z` for every sign vector `z`:
//! the standard Gaussian, the Rademacher cube, and a finite mixture of
//! isotropic Gaussians `s * N(0, I)` where one scale `s` is drawn per row.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{chunk_rng, CHUNK_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub scale: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DistributionKind {
    StandardGaussian,
    Rademacher,
    GaussianScaleMixture { components: Vec<MixtureComponent> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub dim: usize,
}

impl DistributionSpec {
    pub fn standard_gaussian(dim: usize) -> Result<Self> {
        Self::new(DistributionKind::StandardGaussian, dim)
    }

    pub fn rademacher(dim: usize) -> Result<Self> {
        Self::new(DistributionKind::Rademacher, dim)
    }

    pub fn scale_mixture(dim: usize, components: Vec<MixtureComponent>) -> Result<Self> {
        Self::new(DistributionKind::GaussianScaleMixture { components }, dim)
    }

    /// The two-component mixture used as a non-Gaussian witness:
    /// scales 0.5 and 1.5 with equal weight.
    pub fn default_mixture(dim: usize) -> Result<Self> {
        Self::scale_mixture(
            dim,
            vec![
                MixtureComponent {
                    scale: 0.5,
                    weight: 0.5,
                },
                MixtureComponent {
                    scale: 1.5,
                    weight: 0.5,
                },
            ],
        )
    }

    pub fn new(kind: DistributionKind, dim: usize) -> Result<Self> {
        let spec = Self { kind, dim };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("distribution dimension must be at least 1"));
        }
        if let DistributionKind::GaussianScaleMixture { components } = &self.kind {
            if components.is_empty() {
                return Err(invalid("scale mixture needs at least one component"));
            }
            let mut total = 0.0;
            for c in components {
                if !(c.scale > 0.0 && c.scale.is_finite()) {
                    return Err(invalid(format!(
                        "mixture scale {} must be positive",
                        c.scale
                    )));
                }
                if !(0.0..=1.0).contains(&c.weight) {
                    return Err(invalid(format!(
                        "mixture weight {} is not a probability",
                        c.weight
                    )));
                }
                total += c.weight;
            }
            if (total - 1.0).abs() > 1e-12 {
                return Err(invalid(format!("mixture weights sum to {total}, not 1")));
            }
        }
        Ok(())
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kind, DistributionKind::StandardGaussian)
    }

    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self.kind {
            DistributionKind::StandardGaussian => "gaussian",
            DistributionKind::Rademacher => "rademacher",
            DistributionKind::GaussianScaleMixture { .. } => "scale-mixture",
        }
    }

    /// Same kind in another dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.kind.clone(), dim)
    }

    /// Fills `row` with one draw.
    pub fn fill_row<R: Rng + ?Sized>(&self, rng: &mut R, row: &mut [f64]) {
        match &self.kind {
            DistributionKind::StandardGaussian => {
                for v in row.iter_mut() {
                    *v = rng.sample(StandardNormal);
                }
            }
            DistributionKind::Rademacher => {
                for v in row.iter_mut() {
                    *v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
            }
            DistributionKind::GaussianScaleMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut scale = components[components.len() - 1].scale;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        scale = c.scale;
                        break;
                    }
                }
                for v in row.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = scale * z;
                }
            }
        }
    }
}

/// Draws `count` i.i.d. rows. Row `r` is produced by chunk `r / CHUNK_ROWS`
/// on its own stream, so the result is identical for any thread count.
pub fn sample(dist: &DistributionSpec, count: usize, seed: u64) -> Result<Array2<f64>> {
    dist.validate()?;
    if count == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let dim = dist.dim;
    let mut data = vec![0.0; count * dim];
    data.par_chunks_mut(CHUNK_ROWS * dim)
        .enumerate()
        .for_each(|(chunk, block)| {
            let mut rng = chunk_rng(seed, chunk as u64);
            for row in block.chunks_mut(dim) {
                dist.fill_row(&mut rng, row);
            }
        });
    Ok(Array2::from_shape_vec((count, dim), data).expect("shape matches buffer"))
}

/// Elementwise product `x ∘ z` with a sign vector `z`.
pub fn sign_flip(x: &[f64], z: &[i8]) -> Result<Vec<f64>> {
    if x.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: z.len(),
        });
    }
    x.iter()
        .zip(z)
        .map(|(&xi, &zi)| match zi {
            1 => Ok(xi),
            -1 => Ok(-xi),
            other => Err(invalid(format!("sign entry {other} is not ±1"))),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000;
        let xs = sample(&DistributionSpec::standard_gaussian(2).unwrap(), n, 1).unwrap();
        for col in xs.columns() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            assert!(mean.abs() <= 4.0 / (n as f64).sqrt(), "mean {mean}");
            assert!((var - 1.0).abs() <= 0.01, "var {var}");
        }
    }

    #[test]
    fn rademacher_support() {
        let xs = sample(&DistributionSpec::rademacher(3).unwrap(), 8, 7).unwrap();
        assert!(xs.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn gaussian_half_mass_positive() {
        let n = 1_000_000;
        let xs = sample(&DistributionSpec::standard_gaussian(1).unwrap(), n, 2).unwrap();
        let frac = xs.iter().filter(|&&v| v > 0.0).count() as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.002, "fraction {frac}");
    }

    #[test]
    fn sample_is_reproducible() {
        let d = DistributionSpec::default_mixture(3).unwrap();
        let a = sample(&d, 10_000, 99).unwrap();
        let b = sample(&d, 10_000, 99).unwrap();
        assert_eq!(a, b);
        let c = sample(&d, 10_000, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sample_prefix_is_stable_across_counts() {
        let d = DistributionSpec::standard_gaussian(2).unwrap();
        let small = sample(&d, 10, 4).unwrap();
        let big = sample(&d, 2 * CHUNK_ROWS + 5, 4).unwrap();
        assert_eq!(small, big.slice(ndarray::s![..10, ..]));
    }

    #[test]
    fn sign_flip_examples() {
        assert_eq!(sign_flip(&[1.5, -2.0], &[1, 1]).unwrap(), vec![1.5, -2.0]);
        assert_eq!(sign_flip(&[1.5, -2.0], &[-1, 1]).unwrap(), vec![-1.5, -2.0]);
        assert!(matches!(
            sign_flip(&[1.0], &[1, -1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(sign_flip(&[1.0], &[0]).is_err());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(DistributionSpec::standard_gaussian(0).is_err());
        let bad = vec![MixtureComponent {
            scale: 1.0,
            weight: 0.7,
        }];
        assert!(DistributionSpec::scale_mixture(2, bad).is_err());
        assert!(sample(&DistributionSpec::rademacher(2).unwrap(), 0, 1).is_err());
    }
}
