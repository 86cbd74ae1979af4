//! Chunked, reproducible Monte-Carlo expectation estimates.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributions::DistributionSpec;
use crate::error::{invalid, Result};
use crate::rng::{chunk_count, chunk_range, chunk_rng};
use crate::stats::{EstimateWithError, RunningMoments};

/// Estimates `E[f(x)]` for several outputs at once. `f` receives one row, the
/// chunk generator (positioned right after that row was drawn) and an output
/// buffer of length `outputs`.
///
/// Chunks run in parallel; their moments are merged in chunk order.
pub fn mc_estimates_with_rng<F>(
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
    outputs: usize,
    f: F,
) -> Result<Vec<EstimateWithError>>
where
    F: Fn(&[f64], &mut ChaCha8Rng, &mut [f64]) + Sync,
{
    dist.validate()?;
    if n_samples == 0 {
        return Err(invalid("Monte-Carlo sample count must be at least 1"));
    }
    let dim = dist.dim;
    let partials: Vec<Vec<RunningMoments>> = (0..chunk_count(n_samples))
        .into_par_iter()
        .map(|chunk| {
            let (start, end) = chunk_range(n_samples, chunk);
            let mut rng = chunk_rng(seed, chunk as u64);
            let mut row = vec![0.0; dim];
            let mut out = vec![0.0; outputs];
            let mut acc = vec![RunningMoments::new(); outputs];
            for _ in start..end {
                dist.fill_row(&mut rng, &mut row);
                f(&row, &mut rng, &mut out);
                for (m, &v) in acc.iter_mut().zip(&out) {
                    m.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![RunningMoments::new(); outputs];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total.iter().map(RunningMoments::estimate).collect())
}

/// Estimates `E[f(x)]` for several outputs at once.
pub fn mc_estimates<F>(
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
    outputs: usize,
    f: F,
) -> Result<Vec<EstimateWithError>>
where
    F: Fn(&[f64], &mut [f64]) + Sync,
{
    mc_estimates_with_rng(dist, n_samples, seed, outputs, |x, _, out| f(x, out))
}

/// Estimates `E[f(x)]`.
pub fn mc_estimate<F>(
    dist: &DistributionSpec,
    n_samples: usize,
    seed: u64,
    f: F,
) -> Result<EstimateWithError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let v = mc_estimates(dist, n_samples, seed, 1, |x, out| out[0] = f(x))?;
    Ok(v[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::sample;

    #[test]
    fn estimates_agree_with_explicit_samples() {
        let dist = DistributionSpec::standard_gaussian(3).unwrap();
        let n = 10_000;
        let est = mc_estimate(&dist, n, 11, |x| x[0] * x[1] + x[2] * x[2]).unwrap();
        let xs = sample(&dist, n, 11).unwrap();
        let direct = xs
            .rows()
            .into_iter()
            .map(|r| r[0] * r[1] + r[2] * r[2])
            .sum::<f64>()
            / n as f64;
        assert!((est.value - direct).abs() < 1e-12);
        assert!(est.within(1.0, 4.0));
    }
}
