//! CSV import and export of samples and Hermite coefficients.

use std::path::Path;

use ndarray::Array2;

use crate::error::{invalid, Error, Result};
use crate::hermite::HermiteSeries;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes rows of `xs` under the header `x1,...,xn` (plus `y` when labels are
/// given).
pub fn write_samples_csv(path: &Path, xs: &Array2<f64>, ys: Option<&[f64]>) -> Result<()> {
    if let Some(ys) = ys {
        if ys.len() != xs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: xs.nrows(),
                got: ys.len(),
            });
        }
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (1..=xs.ncols()).map(|i| format!("x{i}")).collect();
    if ys.is_some() {
        header.push("y".into());
    }
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (r, row) in xs.outer_iter().enumerate() {
        rec.clear();
        rec.extend(row.iter().map(|&v| fmt_f64(v)));
        if let Some(ys) = ys {
            rec.push(fmt_f64(ys[r]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_samples_csv`].
pub fn read_samples_csv(path: &Path) -> Result<(Array2<f64>, Option<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let labeled = header.iter().next_back() == Some("y");
    let n = header.len() - usize::from(labeled);
    for (i, h) in header.iter().take(n).enumerate() {
        if h != format!("x{}", i + 1) {
            return Err(invalid(format!("unexpected column '{h}' at position {}", i + 1)));
        }
    }
    if n == 0 {
        return Err(invalid("no feature columns"));
    }
    let mut data = Vec::new();
    let mut ys = Vec::new();
    let mut rows = 0;
    for rec in r.records() {
        let rec = rec?;
        for (i, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| invalid(format!("row {}: bad number '{field}': {e}", rows + 1)))?;
            if labeled && i == n {
                ys.push(v);
            } else {
                data.push(v);
            }
        }
        rows += 1;
    }
    let xs = Array2::from_shape_vec((rows, n), data).map_err(|e| invalid(e.to_string()))?;
    Ok((xs, labeled.then_some(ys)))
}

/// Writes `degree,coefficient` rows.
pub fn write_coefficients_csv(path: &Path, series: &HermiteSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["degree", "coefficient"])?;
    for (i, c) in series.coeffs.iter().enumerate() {
        w.write_record([i.to_string(), fmt_f64(*c)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{sample, DistributionSpec};

    #[test]
    fn samples_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let xs = sample(&DistributionSpec::standard_gaussian(3).unwrap(), 50, 4).unwrap();
        let ys: Vec<f64> = xs.column(0).iter().map(|v| v.tanh() / 3.0).collect();
        write_samples_csv(&path, &xs, Some(&ys)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,x3,y\n"));
        let (xr, yr) = read_samples_csv(&path).unwrap();
        assert_eq!(xr, xs);
        assert_eq!(yr.unwrap(), ys);
        write_samples_csv(&path, &xs, None).unwrap();
        assert!(read_samples_csv(&path).unwrap().1.is_none());
    }
}
