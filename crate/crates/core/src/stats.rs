//! Summary statistics for Monte Carlo output.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{FlycomError, Result};

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mu = mean(values);
    values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

fn t_quantile_975(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::NAN)
}

/// Mean and half-width of the two-sided 95% Student-t interval.
pub fn mean_ci95(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(FlycomError::InvalidArgument("no values".into()));
    }
    let mu = mean(values);
    if values.len() < 2 {
        return Ok((mu, f64::NAN));
    }
    let n = values.len() as f64;
    Ok((mu, t_quantile_975(n - 1.0) * (variance(values) / n).sqrt()))
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            out[i] = avg;
        }
        start = end;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spearman {
    pub rho: f64,
    /// Two-sided p-value from the t approximation with `n − 2` degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(FlycomError::DimensionMismatch(format!(
            "{} vs {} samples",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(FlycomError::InvalidArgument(
            "need at least 3 samples".into(),
        ));
    }
    let rho = pearson(&ranks(x), &ranks(y));
    if !rho.is_finite() {
        return Err(FlycomError::InvalidArgument("constant sample".into()));
    }
    let df = (n - 2) as f64;
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| FlycomError::InvalidArgument(e.to_string()))?;
        2.0 * dist.cdf(-t.abs())
    };
    Ok(Spearman { rho, p_value, n })
}

/// Paired comparison of `a` against `b` on shared seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    /// Mean of `a − b`.
    pub mean_diff: f64,
    /// 95% half-width of the mean difference.
    pub ci95: f64,
    pub t_stat: f64,
    /// One-sided p-value for the alternative `mean(a − b) < 0`.
    pub p_less: f64,
    pub n: usize,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() {
        return Err(FlycomError::DimensionMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(FlycomError::InvalidArgument("need at least 2 pairs".into()));
    }
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = diff.len();
    let (mean_diff, ci95) = mean_ci95(&diff)?;
    let se = (variance(&diff) / n as f64).sqrt();
    let df = (n - 1) as f64;
    let (t_stat, p_less) = if se > 0.0 {
        let t = mean_diff / se;
        let dist = StudentsT::new(0.0, 1.0, df)
            .map_err(|e| FlycomError::InvalidArgument(e.to_string()))?;
        (t, dist.cdf(t))
    } else if mean_diff < 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else if mean_diff > 0.0 {
        (f64::INFINITY, 1.0)
    } else {
        (0.0, 1.0)
    };
    Ok(PairedTest {
        mean_diff,
        ci95,
        t_stat,
        p_less,
        n,
    })
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(FlycomError::InvalidArgument(
            "need at least 2 paired points".into(),
        ));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FlycomError::InvalidArgument(
            "abscissae are all equal".into(),
        ));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[10.0, 30.0, 20.0, 30.0]), vec![1.0, 3.5, 2.0, 3.5]);
    }

    #[test]
    fn spearman_perfect_monotone() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        let s = spearman(&x, &y).unwrap();
        assert_eq!(s.rho, -1.0);
        assert_eq!(s.p_value, 0.0);
    }

    #[test]
    fn spearman_reference_value() {
        // rho = 1 - 6 Σd² / (n(n²-1)) with d = (1,-1,1,-1,0): 1 - 24/120 = 0.8
        let s = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((s.rho - 0.8).abs() < 1e-12);
        // t = 0.8 sqrt(3/0.36) = 2.3094, two-sided p with 3 df ≈ 0.1041
        assert!((s.p_value - 0.1041).abs() < 5e-4, "{}", s.p_value);
    }

    #[test]
    fn paired_test_direction() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = [1.5, 2.4, 3.6, 4.4, 5.6];
        let p = paired_t_test(&a, &b).unwrap();
        assert!(p.mean_diff < 0.0 && p.p_less < 0.01);
        let same = paired_t_test(&a, &a).unwrap();
        assert_eq!(same.p_less, 1.0);
    }

    #[test]
    fn ci_matches_t_table() {
        // df = 4: t_0.975 = 2.776445
        let (m, h) = mean_ci95(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(m, 3.0);
        assert!((h - 2.776445 * (2.5f64 / 5.0).sqrt()).abs() < 1e-5);
    }

    #[test]
    fn fit_recovers_line() {
        let x = [1.0, 2.0, 3.0];
        let (s, c) = linear_fit(&x, &[3.0, 5.0, 7.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
    }
}
