//! Summary statistics of return series: moments, Sharpe ratio, Jarque-Bera
//! normality and Pearson correlation.

use serde::{Deserialize, Serialize};

use crate::adf::{adf_test_with, AdfResult, LagSelection};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JbResult {
    pub statistic: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveReport {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub sharpe: f64,
    pub std_err: f64,
    pub adf: AdfResult,
    pub jb: JbResult,
}

fn check_finite(x: &[f64]) -> Result<()> {
    match x.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(i)),
        None => Ok(()),
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `n - 1` denominator.
pub fn sample_std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

/// Biased (moment) skewness and raw kurtosis.
fn moment_shape(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = mean(x);
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in x {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2))
}

pub fn jarque_bera(x: &[f64]) -> Result<JbResult> {
    if x.len() < 8 {
        return Err(Error::InsufficientData { what: "Jarque-Bera", needed: 8, got: x.len() });
    }
    check_finite(x)?;
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::ConstantInput("Jarque-Bera"));
    }
    let (s, k) = moment_shape(x);
    let excess = k - 3.0;
    let statistic = x.len() as f64 / 6.0 * (s * s + excess * excess / 4.0);
    // chi-square(2) survival function
    let p_value = (-statistic / 2.0).exp();
    Ok(JbResult { statistic, skewness: s, excess_kurtosis: excess, p_value })
}

pub fn describe(returns: &[f64], risk_free: f64) -> Result<DescriptiveReport> {
    describe_with(returns, risk_free, LagSelection::default())
}

pub fn describe_with(returns: &[f64], risk_free: f64, lags: LagSelection) -> Result<DescriptiveReport> {
    let n = returns.len();
    if n < 8 {
        return Err(Error::InsufficientData { what: "descriptive statistics", needed: 8, got: n });
    }
    check_finite(returns)?;
    let std_dev = sample_std(returns);
    if std_dev == 0.0 || returns.iter().all(|&v| v == returns[0]) {
        return Err(Error::ConstantInput("returns (Sharpe ratio undefined)"));
    }
    let mean = mean(returns);
    let min = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let max = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DescriptiveReport {
        n,
        mean,
        std_dev,
        min,
        max,
        sharpe: (mean - risk_free) / std_dev,
        std_err: std_dev / (n as f64).sqrt(),
        adf: adf_test_with(returns, lags)?,
        jb: jarque_bera(returns)?,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ConstantInput("correlation"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Symmetric Pearson correlation matrix with an exact unit diagonal.
pub fn correlation_matrix(series: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let k = series.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let n = series[0].len();
    if n < 3 {
        return Err(Error::InsufficientData { what: "correlation", needed: 3, got: n });
    }
    for s in series {
        if s.len() != n {
            return Err(Error::LengthMismatch { left: n, right: s.len() });
        }
        check_finite(s)?;
        if s.iter().all(|&v| v == s[0]) {
            return Err(Error::ConstantInput("correlation"));
        }
    }
    let mut m = vec![vec![0.0; k]; k];
    for i in 0..k {
        m[i][i] = 1.0;
        for j in 0..i {
            let r = pearson(&series[i], &series[j])?;
            m[i][j] = r;
            m[j][i] = r;
        }
    }
    Ok(m)
}
