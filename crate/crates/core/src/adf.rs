//! Augmented Dickey-Fuller unit-root test, constant-only regression
//!
//! `dx[t] = a + b * x[t-1] + sum_{i=1..k} c_i * dx[t-i] + w[t]`
//!
//! The statistic is the OLS t-ratio on `b`. Critical values at 1%, 5% and 10%
//! come from the MacKinnon (2010) finite-sample response surfaces; the 0.1%
//! value and the p-value come from the MacKinnon (1994) asymptotic
//! approximation, both for the single-series, constant-only case.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::ols::{ols, OlsFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SignificanceLevel {
    #[serde(rename = "0.001")]
    P001,
    #[serde(rename = "0.01")]
    P01,
    #[serde(rename = "0.05")]
    P05,
    #[serde(rename = "0.10")]
    P10,
}

impl SignificanceLevel {
    /// Finest first.
    pub const ALL: [SignificanceLevel; 4] = [Self::P001, Self::P01, Self::P05, Self::P10];

    pub fn alpha(self) -> f64 {
        match self {
            Self::P001 => 0.001,
            Self::P01 => 0.01,
            Self::P05 => 0.05,
            Self::P10 => 0.10,
        }
    }

    /// Conventional star rating (`***` for 0.1%).
    pub fn stars(self) -> &'static str {
        match self {
            Self::P001 => "***",
            Self::P01 => "**",
            Self::P05 => "*",
            Self::P10 => ".",
        }
    }
}

impl fmt::Display for SignificanceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::P001 => f.write_str("0.001"),
            Self::P01 => f.write_str("0.01"),
            Self::P05 => f.write_str("0.05"),
            Self::P10 => f.write_str("0.10"),
        }
    }
}

/// How many lagged differences enter the regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagSelection {
    /// Exactly this many lags.
    Fixed(usize),
    /// `floor(12 * (n/100)^0.25)` lags.
    Schwert,
    /// Lag in `0..=schwert(n)` minimising the regression AIC on a common sample.
    #[default]
    AicUpToSchwert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lags_used: usize,
    pub nobs: usize,
    pub p_value: f64,
    /// Finest level at which the unit-root null is rejected.
    pub reject_at: Option<SignificanceLevel>,
    pub critical_values: BTreeMap<SignificanceLevel, f64>,
}

impl AdfResult {
    pub fn rejects_at(&self, level: SignificanceLevel) -> bool {
        self.statistic < self.critical_values[&level]
    }
}

/// `floor(12 * (n / 100)^(1/4))`.
pub fn schwert_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

// MacKinnon (2010), Table 2, N = 1, constant: tau = b0 + b1/T + b2/T^2 + b3/T^3
const CRIT_2010_C: [(SignificanceLevel, [f64; 4]); 3] = [
    (SignificanceLevel::P01, [-3.43035, -6.5393, -16.786, -79.433]),
    (SignificanceLevel::P05, [-2.86154, -2.8903, -4.234, -40.040]),
    (SignificanceLevel::P10, [-2.56677, -1.5384, -2.809, 0.0]),
];

// MacKinnon (1994) p-value surface, N = 1, constant.
const TAU_MAX_C: f64 = 2.74;
const TAU_MIN_C: f64 = -18.83;
const TAU_STAR_C: f64 = -1.61;
const TAU_C_SMALLP: [f64; 3] = [2.1659, 1.4412, 3.8269e-2];
const TAU_C_LARGEP: [f64; 4] = [1.7339, 9.3202e-1, -1.2745e-1, -1.0368e-2];

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Approximate p-value of a constant-only ADF statistic.
pub fn mackinnon_p_value(tau: f64) -> f64 {
    if tau > TAU_MAX_C {
        return 1.0;
    }
    if tau < TAU_MIN_C {
        return 0.0;
    }
    let z = if tau <= TAU_STAR_C {
        TAU_C_SMALLP.iter().rev().fold(0.0, |acc, c| acc * tau + c)
    } else {
        TAU_C_LARGEP.iter().rev().fold(0.0, |acc, c| acc * tau + c)
    };
    std_normal().cdf(z)
}

/// Critical values for a regression with `nobs` observations.
pub fn critical_values(nobs: usize) -> BTreeMap<SignificanceLevel, f64> {
    let t = nobs as f64;
    let mut out: BTreeMap<SignificanceLevel, f64> =
        CRIT_2010_C.iter().map(|(lvl, b)| (*lvl, b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t))).collect();
    // Invert the small-p quadratic for p = 0.001; take the root on the branch
    // where the surface is increasing.
    let z = std_normal().inverse_cdf(0.001);
    let [c0, c1, c2] = TAU_C_SMALLP;
    let disc = c1 * c1 - 4.0 * c2 * (c0 - z);
    out.insert(SignificanceLevel::P001, (-c1 + disc.sqrt()) / (2.0 * c2));
    out
}

fn design(x: &[f64], dx: &[f64], lags: usize, first_row: usize) -> (DMatrix<f64>, DVector<f64>) {
    let rows: Vec<usize> = (first_row..dx.len()).collect();
    let k = 2 + lags;
    let xm = DMatrix::from_fn(rows.len(), k, |r, c| {
        let t = rows[r];
        match c {
            0 => 1.0,
            1 => x[t],
            _ => dx[t - (c - 1)],
        }
    });
    let yv = DVector::from_fn(rows.len(), |r, _| dx[rows[r]]);
    (xm, yv)
}

fn regress(x: &[f64], dx: &[f64], lags: usize, first_row: usize) -> Result<OlsFit> {
    let (xm, yv) = design(x, dx, lags, first_row);
    ols(&xm, &yv)
}

pub fn adf_test(x: &[f64], lags: Option<usize>) -> Result<AdfResult> {
    adf_test_with(x, lags.map_or(LagSelection::default(), LagSelection::Fixed))
}

pub fn adf_test_with(x: &[f64], selection: LagSelection) -> Result<AdfResult> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = x.len();
    let fits = |k: usize| n > k + 2 && n - k - 2 > k + 2;
    let k_max = match selection {
        LagSelection::Fixed(k) => k,
        LagSelection::Schwert | LagSelection::AicUpToSchwert => {
            let mut k = schwert_lags(n);
            while k > 0 && !fits(k) {
                k -= 1;
            }
            k
        }
    };
    if !fits(k_max) {
        return Err(Error::InsufficientData { what: "ADF regression", needed: 2 * k_max + 5, got: n });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::SingularRegression("constant series"));
    }
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();

    let lags = match selection {
        LagSelection::AicUpToSchwert => {
            let mut best: Option<(f64, usize)> = None;
            for k in 0..=k_max {
                // common sample: every candidate drops the first k_max rows
                if let Ok(fit) = regress(x, &dx, k, k_max) {
                    let aic = fit.aic();
                    if best.is_none_or(|(b, _)| aic < b) {
                        best = Some((aic, k));
                    }
                }
            }
            best.ok_or(Error::SingularRegression("no lag order admits a regression"))?.1
        }
        _ => k_max,
    };

    let fit = regress(x, &dx, lags, lags)?;
    let statistic = fit.t_stat(1);
    if !statistic.is_finite() {
        return Err(Error::SingularRegression("non-finite t-ratio"));
    }
    let critical_values = critical_values(fit.nobs);
    let reject_at = SignificanceLevel::ALL.into_iter().find(|lvl| statistic < critical_values[lvl]);
    Ok(AdfResult {
        statistic,
        lags_used: lags,
        nobs: fit.nobs,
        p_value: mackinnon_p_value(statistic),
        reject_at,
        critical_values,
    })
}
