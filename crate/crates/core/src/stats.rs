//! Small statistics helpers: running moments, estimates with standard error,
//! least-squares line fits and quantiles.

use serde::{Deserialize, Serialize};

/// A Monte-Carlo estimate together with its standard error.
///
/// `stderr` is the sample standard deviation divided by `sqrt(n_samples)`.
/// With fewer than two samples there is no error information and `stderr`
/// is reported as infinity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
}

impl EstimateWithError {
    pub fn new(value: f64, stderr: f64, n_samples: usize) -> Self {
        debug_assert!(stderr >= 0.0 || stderr.is_nan());
        Self {
            value,
            stderr,
            n_samples,
        }
    }

    /// Returns `true` if `|value - target| <= sigmas * stderr`.
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.stderr
    }

    /// Standard error of the difference of two independent estimates.
    pub fn combined_stderr(&self, other: &Self) -> f64 {
        self.stderr.hypot(other.stderr)
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::new(
            self.value * factor,
            self.stderr * factor.abs(),
            self.n_samples,
        )
    }
}

/// Streaming mean and variance (Welford), mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningMoments {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise merge.
    pub fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * (self.count as f64) * (other.count as f64) / n;
        self.count += other.count;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn estimate(&self) -> EstimateWithError {
        let stderr = if self.count < 2 {
            f64::INFINITY
        } else {
            (self.variance().max(0.0) / self.count as f64).sqrt()
        };
        EstimateWithError::new(self.mean, stderr, self.count)
    }
}

/// Result of an ordinary least-squares line fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits a line by least squares. Requires at least two distinct `x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(LineFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Linear-interpolation quantile of already sorted data (`q` in `[0, 1]`).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Median, first and third quartile of `values` (sorted internally with a
/// total order so NaNs cannot reorder results between runs).
pub fn median_iqr(values: &[f64]) -> (f64, f64, f64) {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    (
        quantile_sorted(&v, 0.5),
        quantile_sorted(&v, 0.25),
        quantile_sorted(&v, 0.75),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 / 7.0).collect();
        let mut whole = RunningMoments::new();
        data.iter().for_each(|&x| whole.push(x));
        let mut left = RunningMoments::new();
        let mut right = RunningMoments::new();
        data[..333].iter().for_each(|&x| left.push(x));
        data[333..].iter().for_each(|&x| right.push(x));
        left.merge(&right);
        assert_relative_eq!(left.mean(), whole.mean(), epsilon = 1e-12);
        assert_relative_eq!(left.variance(), whole.variance(), epsilon = 1e-10);
    }

    #[test]
    fn single_sample_has_no_error_information() {
        let mut m = RunningMoments::new();
        m.push(3.0);
        let e = m.estimate();
        assert_eq!(e.value, 3.0);
        assert!(e.stderr.is_infinite());
    }

    #[test]
    fn exact_line_fit() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [3.0, 5.0, 7.0, 9.0];
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 2.0);
        assert_relative_eq!(fit.intercept, 1.0);
        assert_relative_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn quartiles_interpolate() {
        let (med, q1, q3) = median_iqr(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((med, q1, q3), (3.0, 2.0, 4.0));
        let (med, _, _) = median_iqr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(med, 2.5);
    }
}
