//! A uniform face over the three forecasting models used in benchmarks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arima::{select_order, ArimaModel, OrderGrid};
use crate::error::{Error, Result};
use crate::hybrid::{fit_hybrid, HybridModel};
use crate::knn::{fit_knn, KnnConfig, KnnModel};
use crate::lstm::NetConfig;
use crate::preprocess::MinMaxScaler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ARIMA")]
    Arima,
    #[serde(rename = "ETS-ANN")]
    Hybrid,
    #[serde(rename = "kNN")]
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Arima, ModelKind::Hybrid, ModelKind::Knn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Arima => "ARIMA",
            ModelKind::Hybrid => "ETS-ANN",
            ModelKind::Knn => "kNN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "arima" => Ok(ModelKind::Arima),
            "ets-ann" | "ets-nn" | "hybrid" | "etsann" => Ok(ModelKind::Hybrid),
            "knn" => Ok(ModelKind::Knn),
            other => Err(Error::InvalidParameter(format!("unknown model {other:?}"))),
        }
    }
}

/// kNN fitted on min-max scaled prices; forecasts are mapped back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledKnn {
    pub scaler: MinMaxScaler,
    pub model: KnnModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "fit")]
pub enum FittedModel {
    #[serde(rename = "ARIMA")]
    Arima(ArimaModel),
    #[serde(rename = "ETS-ANN")]
    Hybrid(HybridModel),
    #[serde(rename = "kNN")]
    Knn(KnnModel),
    #[serde(rename = "kNN-scaled")]
    ScaledKnn(ScaledKnn),
}

/// Settings shared by every fit in a benchmark run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelSettings {
    pub arima_grid: OrderGrid,
    /// `seed` is replaced per cell.
    pub net: NetConfig,
    pub knn: KnnConfig,
    /// Fit kNN on min-max scaled prices instead of raw levels.
    pub knn_scaled: bool,
}

pub fn fit_model(
    kind: ModelKind,
    y: &[f64],
    settings: &ModelSettings,
    knn: KnnConfig,
    seed: u64,
) -> Result<FittedModel> {
    match kind {
        ModelKind::Arima => select_order(y, &settings.arima_grid).map(FittedModel::Arima),
        ModelKind::Hybrid => {
            let cfg = NetConfig { seed, ..settings.net.clone() };
            fit_hybrid(y, &cfg).map(FittedModel::Hybrid)
        }
        ModelKind::Knn if settings.knn_scaled => {
            let scaler = MinMaxScaler::fit_or_unit(y)?;
            let model = fit_knn(&scaler.transform(y), knn)?;
            Ok(FittedModel::ScaledKnn(ScaledKnn { scaler, model }))
        }
        ModelKind::Knn => fit_knn(y, knn).map(FittedModel::Knn),
    }
}

impl FittedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            FittedModel::Arima(_) => ModelKind::Arima,
            FittedModel::Hybrid(_) => ModelKind::Hybrid,
            FittedModel::Knn(_) | FittedModel::ScaledKnn(_) => ModelKind::Knn,
        }
    }

    /// Static multi-step forecast from the end of the training data.
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        match self {
            FittedModel::Arima(m) => m.forecast(h),
            FittedModel::Hybrid(m) => m.forecast(h),
            FittedModel::Knn(m) => m.forecast(h),
            FittedModel::ScaledKnn(s) => Ok(s.scaler.inverse_transform(&s.model.forecast(h)?)),
        }
    }

    /// One-step-ahead forecasts with each realised value fed back; no refits.
    pub fn rolling_forecast(&self, actuals: &[f64]) -> Result<Vec<f64>> {
        if actuals.is_empty() {
            return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        match self {
            FittedModel::Arima(m) => Ok(m.rolling_forecast(actuals)),
            FittedModel::Hybrid(m) => Ok(m.rolling_forecast(actuals)?.total),
            FittedModel::Knn(m) => m.rolling_forecast(actuals),
            FittedModel::ScaledKnn(s) => {
                let scaled = s.model.rolling_forecast(&s.scaler.transform(actuals))?;
                Ok(s.scaler.inverse_transform(&scaled))
            }
        }
    }

    /// Short human-readable summary of the fitted configuration.
    pub fn summary(&self) -> String {
        match self {
            FittedModel::Arima(m) => format!("ARIMA{}", m.order),
            FittedModel::Hybrid(m) => format!(
                "ETS(A,Ad,N) alpha={:.4} beta={:.4} phi={:.4}; LSTM h={} w={}",
                m.linear.alpha,
                m.linear.beta,
                m.linear.phi,
                m.nonlinear.config.hidden_units,
                m.nonlinear.window()
            ),
            FittedModel::Knn(m) => format!("k={} m={}", m.config.k, m.config.embed),
            FittedModel::ScaledKnn(s) => format!("k={} m={} scaled", s.model.config.k, s.model.config.embed),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if let FittedModel::Hybrid(h) = &m {
            // runs the embedded schema and weight checks
            HybridModel::from_json(&serde_json::to_string(h)?)?;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_parsing() {
        assert_eq!("arima".parse::<ModelKind>().unwrap(), ModelKind::Arima);
        assert_eq!("ETS-ANN".parse::<ModelKind>().unwrap(), ModelKind::Hybrid);
        assert_eq!("KNN".parse::<ModelKind>().unwrap(), ModelKind::Knn);
        assert!("lstm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn scaled_knn_is_scale_equivariant() {
        let y: Vec<f64> = (0..60).map(|t| 100.0 + 5.0 * (t as f64 * 0.37).sin()).collect();
        let z: Vec<f64> = y.iter().map(|v| 3.0 * v + 7.0).collect();
        let s = ModelSettings { knn_scaled: true, ..ModelSettings::default() };
        let cfg = KnnConfig { k: 3, embed: 4 };
        let a = fit_model(ModelKind::Knn, &y, &s, cfg, 0).unwrap().forecast(5).unwrap();
        let b = fit_model(ModelKind::Knn, &z, &s, cfg, 0).unwrap().forecast(5).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((3.0 * u + 7.0 - v).abs() < 1e-9);
        }
    }

    #[test]
    fn json_round_trip_all_kinds() {
        let y: Vec<f64> = (0..80).map(|t| 50.0 + 0.1 * t as f64 + (t as f64 * 0.5).sin()).collect();
        let s = ModelSettings {
            net: NetConfig { hidden_units: 4, epochs: 3, ..NetConfig::default() },
            arima_grid: OrderGrid { max_p: 1, max_q: 1, ..OrderGrid::default() },
            ..ModelSettings::default()
        };
        for kind in ModelKind::ALL {
            let m = fit_model(kind, &y, &s, KnnConfig::default(), 11).unwrap();
            let back = FittedModel::from_json(&m.to_json().unwrap()).unwrap();
            assert_eq!(back, m);
            assert_eq!(back.forecast(4).unwrap(), m.forecast(4).unwrap());
            assert_eq!(m.kind(), kind);
        }
    }
}
