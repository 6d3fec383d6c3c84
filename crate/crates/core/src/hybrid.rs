//! Additive ETS + LSTM hybrid: the damped-trend ETS model captures the linear
//! structure, the residual network models what ETS leaves behind, and the
//! forecast is the sum of the two.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ets::{fit_ets, EtsModel};
use crate::lstm::{self, NetConfig, ResidualNet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub linear: EtsModel,
    pub nonlinear: ResidualNet,
    /// In-sample ETS one-step errors the network was trained on.
    pub residuals: Vec<f64>,
}

/// A hybrid forecast kept together with its two additive components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridForecast {
    pub total: Vec<f64>,
    pub linear: Vec<f64>,
    pub nonlinear: Vec<f64>,
}

pub fn fit_hybrid(y: &[f64], net_cfg: &NetConfig) -> Result<HybridModel> {
    let linear = fit_ets(y)?;
    let residuals = linear.residuals(y)?;
    let nonlinear = lstm::train(&residuals, net_cfg)?;
    Ok(HybridModel { linear, nonlinear, residuals })
}

impl HybridModel {
    fn last_window(&self) -> &[f64] {
        &self.residuals[self.residuals.len() - self.nonlinear.window()..]
    }

    pub fn forecast_components(&self, h: usize) -> Result<HybridForecast> {
        let linear = self.linear.forecast(h)?;
        let nonlinear = self.nonlinear.predict_residuals(self.last_window(), h)?;
        let total = linear.iter().zip(&nonlinear).map(|(a, b)| a + b).collect();
        Ok(HybridForecast { total, linear, nonlinear })
    }

    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        Ok(self.forecast_components(h)?.total)
    }

    /// One-step predictions over `actuals`. After each step the realised value
    /// updates the ETS state and its error enters the residual window.
    pub fn rolling_forecast(&self, actuals: &[f64]) -> Result<HybridForecast> {
        let n = actuals.len();
        let (mut total, mut lin, mut nl) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        let (mut level, mut trend) = (self.linear.final_level, self.linear.final_trend);
        let mut window = self.last_window().to_vec();
        for &y in actuals {
            let a = level + self.linear.phi * trend;
            let b = self.nonlinear.predict_one(&window)?;
            lin.push(a);
            nl.push(b);
            total.push(a + b);
            let (l, t, e) = self.linear.step_state(level, trend, y);
            level = l;
            trend = t;
            window.remove(0);
            window.push(e);
        }
        Ok(HybridForecast { total, linear: lin, nonlinear: nl })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        // re-validate the embedded network record
        let net = ResidualNet::from_json(&serde_json::to_string(&m.nonlinear)?)?;
        if m.residuals.len() != m.linear.n_obs {
            return Err(Error::LengthMismatch { left: m.residuals.len(), right: m.linear.n_obs });
        }
        Ok(Self { nonlinear: net, ..m })
    }
}

pub fn forecast_hybrid(m: &HybridModel, h: usize) -> Result<Vec<f64>> {
    m.forecast(h)
}
