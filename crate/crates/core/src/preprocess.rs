//! Log returns and min-max scaling.
//!
//! Seasonal adjustment is not applied: every model in this crate is
//! non-seasonal, so the adjustment step reduces to the identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::PriceSeries;

pub fn log_returns(s: &PriceSeries) -> Vec<f64> {
    // PriceSeries guarantees positive closes
    log_returns_of(s.closes()).expect("PriceSeries closes are positive")
}

/// `ln(p[t+1] / p[t])` for every consecutive pair.
pub fn log_returns_of(prices: &[f64]) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData { what: "log returns", needed: 2, got: prices.len() });
    }
    if let Some((index, &value)) = prices.iter().enumerate().find(|(_, p)| !(**p > 0.0)) {
        return Err(Error::NonPositivePrice { index, value });
    }
    Ok(prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect())
}

/// Affine map sending `[lo, hi]` to `[0, 1]`. Values outside the fitted range
/// are passed through unclipped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    lo: f64,
    hi: f64,
}

impl MinMaxScaler {
    pub fn fit(x: &[f64]) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::InsufficientData { what: "scaler fit", needed: 2, got: x.len() });
        }
        let (lo, hi) = min_max(x)?;
        if hi <= lo {
            return Err(Error::ConstantInput("min-max scaler"));
        }
        Ok(Self { lo, hi })
    }

    /// Like [`fit`](Self::fit) but a constant input yields a unit-width
    /// scaler anchored at that constant instead of an error.
    pub fn fit_or_unit(x: &[f64]) -> Result<Self> {
        match Self::fit(x) {
            Err(Error::ConstantInput(_)) => Ok(Self { lo: x[0], hi: x[0] + 1.0 }),
            other => other,
        }
    }

    pub fn from_bounds(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::InvalidParameter(format!("scaler bounds [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn scale(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }

    #[inline]
    pub fn unscale(&self, v: f64) -> f64 {
        v * (self.hi - self.lo) + self.lo
    }

    pub fn transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.scale(v)).collect()
    }

    pub fn inverse_transform(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.unscale(v)).collect()
    }
}

fn min_max(x: &[f64]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &v) in x.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok((lo, hi))
}
