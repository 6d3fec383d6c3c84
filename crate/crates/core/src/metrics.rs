//! Point-forecast error measures.

use crate::error::{Error, Result};

fn check(actuals: &[f64], forecasts: &[f64]) -> Result<()> {
    if actuals.len() != forecasts.len() {
        return Err(Error::LengthMismatch { left: actuals.len(), right: forecasts.len() });
    }
    if actuals.is_empty() {
        return Err(Error::InsufficientData { what: "forecast errors", needed: 1, got: 0 });
    }
    Ok(())
}

pub fn mae(actuals: &[f64], forecasts: &[f64]) -> Result<f64> {
    check(actuals, forecasts)?;
    let s: f64 = actuals.iter().zip(forecasts).map(|(a, f)| (a - f).abs()).sum();
    Ok(s / actuals.len() as f64)
}

pub fn rmse(actuals: &[f64], forecasts: &[f64]) -> Result<f64> {
    check(actuals, forecasts)?;
    let s: f64 = actuals.iter().zip(forecasts).map(|(a, f)| (a - f) * (a - f)).sum();
    Ok((s / actuals.len() as f64).sqrt())
}

/// Mean absolute percentage error, in percent.
pub fn mape(actuals: &[f64], forecasts: &[f64]) -> Result<f64> {
    check(actuals, forecasts)?;
    if let Some(i) = actuals.iter().position(|&a| a == 0.0) {
        return Err(Error::ZeroActual(i));
    }
    let s: f64 = actuals.iter().zip(forecasts).map(|(a, f)| ((a - f) / a).abs()).sum();
    Ok(100.0 * s / actuals.len() as f64)
}

/// Geometric mean of `model_maes[i] / benchmark_maes[i]`.
pub fn avg_rel_mae(model_maes: &[f64], benchmark_maes: &[f64]) -> Result<f64> {
    check(model_maes, benchmark_maes)?;
    for (i, (&m, &b)) in model_maes.iter().zip(benchmark_maes).enumerate() {
        if !(m > 0.0 && b > 0.0 && m.is_finite() && b.is_finite()) {
            return Err(Error::NonPositiveMae(i));
        }
    }
    let s: f64 = model_maes.iter().zip(benchmark_maes).map(|(m, b)| (m / b).ln()).sum();
    Ok((s / model_maes.len() as f64).exp())
}
