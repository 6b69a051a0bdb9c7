//! Summary statistics and normality tests for replicate samples.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::numeric::{mean_and_variance, pairwise_sum};
use crate::{Error, Result};

/// Smallest sample accepted by [`normality_tests`].
pub const MIN_NORMALITY_SAMPLE: usize = 50;

/// One-sample KS test against `N(0, s^2)` with `s^2` the sample variance,
/// and moment tests for skewness and excess kurtosis.
///
/// The KS p-value uses the asymptotic Kolmogorov law with Stephens'
/// finite-sample correction. Because the variance is estimated, the test is
/// conservative (Lilliefors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalityReport {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub skewness: f64,
    pub skewness_z: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_z: f64,
}

/// Central moments `(m2, m3, m4)` with divisor `n`.
fn central_moments(xs: &[f64], mean: f64) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let pow = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / n;
    (pow(2), pow(3), pow(4))
}

/// Standard error of the unbiased sample variance,
/// `sqrt((m4 - s^4 (n - 3)/(n - 1)) / n)`.
pub fn variance_standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mean, var) = mean_and_variance(xs);
    let (_, _, m4) = central_moments(xs, mean);
    ((m4 - var * var * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// Kolmogorov distribution tail `P(K > lambda)`.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// KS statistic `sup |F_n - F|` of a sample against a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of the KS statistic `d` for sample size `n`.
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)
}

pub fn normality_tests(sample: &[f64]) -> Result<NormalityReport> {
    let n = sample.len();
    if n < MIN_NORMALITY_SAMPLE {
        return Err(Error::InvalidInput(format!(
            "normality tests need at least {MIN_NORMALITY_SAMPLE} values, got {n}"
        )));
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("sample contains non-finite values".into()));
    }
    let (mean, variance) = mean_and_variance(sample);
    let (m2, m3, m4) = central_moments(sample, mean);
    if !(m2 > 0.0) {
        return Err(Error::DegenerateSample("sample has zero variance".into()));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::DegenerateSample(e.to_string()))?;
    let ks = ks_statistic(sample, |x| normal.cdf(x));
    let nf = n as f64;
    let skewness = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let se_skew = (6.0 * (nf - 2.0) / ((nf + 1.0) * (nf + 3.0))).sqrt();
    let se_kurt =
        (24.0 * nf * (nf - 2.0) * (nf - 3.0) / ((nf + 1.0).powi(2) * (nf + 3.0) * (nf + 5.0))).sqrt();
    Ok(NormalityReport {
        n,
        mean,
        variance,
        ks_statistic: ks,
        ks_p_value: ks_p_value(ks, n),
        skewness,
        skewness_z: skewness / se_skew,
        excess_kurtosis,
        kurtosis_z: excess_kurtosis / se_kurt,
    })
}

/// Two-sample KS statistic and asymptotic p-value.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("two-sample KS needs non-empty samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let se = ne.sqrt();
    Ok((d, kolmogorov_tail((se + 0.12 + 0.11 / se) * d)))
}
