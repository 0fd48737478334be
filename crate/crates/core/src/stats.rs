//! Least-squares line fitting and correlation.

use crate::error::{Error, Result};

/// Result of an ordinary least-squares fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Centered sums (Sxx, Syy, Sxy).
fn centered_moments(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64, f64) {
    let mx = mean(xs);
    let my = mean(ys);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    (mx, my, sxx, syy, sxy)
}

fn check_pairs(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} x values, {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::InsufficientData { usable: xs.len() });
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::domain("non-finite value in regression input"));
    }
    Ok(())
}

pub fn ordinary_least_squares(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    check_pairs(xs, ys)?;
    let (mx, my, sxx, _, sxy) = centered_moments(xs, ys);
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateFit("zero variance in x".into()));
    }
    let slope = sxy / sxx;
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// Pearson product-moment correlation of two equal-length samples.
pub fn pearson_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pairs(xs, ys)?;
    let (_, _, sxx, syy, sxy) = centered_moments(xs, ys);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "one of the samples has zero variance".into(),
        ));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Pearson r from raw sums, written independently of `centered_moments`.
    fn pearson_raw_sums(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let sx: f64 = xs.iter().sum();
        let sy: f64 = ys.iter().sum();
        let sxx: f64 = xs.iter().map(|x| x * x).sum();
        let syy: f64 = ys.iter().map(|y| y * y).sum();
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    #[test]
    fn pearson_examples() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((pearson_correlation(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = xs.iter().map(|x| -x).collect();
        assert!((pearson_correlation(&xs, &neg).unwrap() + 1.0).abs() < 1e-15);

        let ys = [1.0, 2.0, 3.0, 100.0];
        let oracle = pearson_raw_sums(&xs, &ys);
        assert!((oracle - 0.7857).abs() < 1e-3, "oracle {oracle}");
        assert!((pearson_correlation(&xs, &ys).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn pearson_rejects_degenerate_input() {
        assert!(matches!(
            pearson_correlation(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(pearson_correlation(&[1.0], &[1.0]).is_err());
        assert!(pearson_correlation(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ols_recovers_exact_line() {
        let xs = [-0.6, -0.3, 0.0, 0.3, 0.6];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let fit = ordinary_least_squares(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
    }

    #[test]
    fn ols_rejects_constant_x() {
        assert!(matches!(
            ordinary_least_squares(&[0.3, 0.3, 0.3], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateFit(_))
        ));
    }
}
