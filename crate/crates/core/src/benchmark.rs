//! Benchmark harness: every (asset, period, model) cell is sliced, split
//! chronologically, fitted on the training closes and scored on the held-out
//! closes; relative MAE is then taken against the ARIMA cells.

use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forecaster::{fit_model, FittedModel, ModelKind, ModelSettings};
use crate::knn::{tuned_k, KnnConfig};
use crate::market_data::{slice_period, split_train_test, PeriodSpec, PriceSeries};
use crate::metrics::{avg_rel_mae, mae, mape, rmse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// One multi-step forecast over the whole test window.
    #[default]
    Static,
    /// One-step-ahead forecasts with realised values fed back, no refitting.
    Rolling,
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMode::Static => "static",
            EvalMode::Rolling => "rolling",
        })
    }
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "static" => Ok(EvalMode::Static),
            "rolling" => Ok(EvalMode::Rolling),
            other => Err(Error::InvalidParameter(format!("unknown evaluation mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub ratio: f64,
    pub seed: u64,
    pub mode: EvalMode,
    pub models: Vec<ModelKind>,
    pub settings: ModelSettings,
    /// Forces one `k` for every kNN cell instead of the tuned table.
    pub knn_k: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            ratio: 0.8,
            seed: 42,
            mode: EvalMode::Static,
            models: ModelKind::ALL.to_vec(),
            settings: ModelSettings::default(),
            knn_k: None,
        }
    }
}

impl BenchmarkConfig {
    /// `k` for a cell: the override, else the tuned table, else the default.
    pub fn knn_config(&self, asset: &str, period: &str) -> KnnConfig {
        let k = self.knn_k.or_else(|| tuned_k(asset, period)).unwrap_or(self.settings.knn.k);
        KnnConfig { k, ..self.settings.knn }
    }
}

/// Seed for one cell: the first eight bytes (little-endian) of
/// `SHA-256("marketcast-cell" 0 seed_le model 0 asset 0 period)`.
pub fn cell_seed(global: u64, model: ModelKind, asset: &str, period: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"marketcast-cell\0");
    h.update(global.to_le_bytes());
    for part in [model.name(), asset, period] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEval {
    pub model: ModelKind,
    pub asset: String,
    pub period: String,
    pub mode: EvalMode,
    pub seed: u64,
    pub n_train: usize,
    /// Fitted configuration, e.g. the selected ARIMA order or kNN `k`.
    pub spec: String,
    pub forecasts: Vec<f64>,
    pub actuals: Vec<f64>,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub mape: Option<f64>,
    /// Relative MAE against the benchmark model's cell (N = 1).
    pub avg_rel_mae: Option<f64>,
    pub error: Option<String>,
    #[serde(skip)]
    pub fitted: Option<FittedModel>,
}

impl ForecastEval {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn status(&self) -> &'static str {
        if self.is_ok() {
            "ok"
        } else {
            "failed"
        }
    }
}

/// Relative MAE of `model` against the benchmark for one period, either for
/// one asset or pooled (geometric mean) over all assets with both cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelMaeEntry {
    pub model: ModelKind,
    pub period: String,
    /// `None` for the pooled entry.
    pub asset: Option<String>,
    pub n: usize,
    pub value: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkGrid {
    pub benchmark_model: ModelKind,
    pub mode: EvalMode,
    pub cells: Vec<ForecastEval>,
    pub avg_rel_mae: Vec<RelMaeEntry>,
}

impl BenchmarkGrid {
    pub fn cell(&self, model: ModelKind, asset: &str, period: &str) -> Option<&ForecastEval> {
        self.cells.iter().find(|c| c.model == model && c.asset == asset && c.period == period)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }

    pub fn relative(&self, model: ModelKind, asset: Option<&str>, period: &str) -> Option<f64> {
        self.avg_rel_mae
            .iter()
            .find(|e| e.model == model && e.asset.as_deref() == asset && e.period == period)
            .and_then(|e| e.value)
    }

    /// Hex SHA-256 of the canonical JSON of cells and relative errors.
    pub fn grid_hash(&self) -> Result<String> {
        let json = serde_json::to_vec(self)?;
        Ok(hex::encode(Sha256::digest(&json)))
    }
}

fn evaluate_cell(series: &PriceSeries, period: &PeriodSpec, model: ModelKind, cfg: &BenchmarkConfig) -> ForecastEval {
    let asset = series.asset_id().to_string();
    let seed = cell_seed(cfg.seed, model, &asset, &period.label);
    let mut cell = ForecastEval {
        model,
        asset,
        period: period.label.clone(),
        mode: cfg.mode,
        seed,
        n_train: 0,
        spec: String::new(),
        forecasts: Vec::new(),
        actuals: Vec::new(),
        mae: None,
        rmse: None,
        mape: None,
        avg_rel_mae: None,
        error: None,
        fitted: None,
    };
    if let Err(e) = run_cell(series, period, cfg, &mut cell) {
        warn!("{} {} {}: {e}", cell.model, cell.asset, cell.period);
        cell.error = Some(e.to_string());
        cell.mae = None;
        cell.rmse = None;
        cell.mape = None;
    }
    cell
}

fn run_cell(series: &PriceSeries, period: &PeriodSpec, cfg: &BenchmarkConfig, cell: &mut ForecastEval) -> Result<()> {
    let slice = slice_period(series, period)?;
    let split = split_train_test(&slice, cfg.ratio)?;
    let train = split.train.closes();
    cell.n_train = train.len();
    cell.actuals = split.test.closes().to_vec();
    let knn = cfg.knn_config(&cell.asset, &cell.period);
    let fitted = fit_model(cell.model, train, &cfg.settings, knn, cell.seed)?;
    cell.spec = fitted.summary();
    cell.forecasts = match cfg.mode {
        EvalMode::Static => fitted.forecast(cell.actuals.len())?,
        EvalMode::Rolling => fitted.rolling_forecast(&cell.actuals)?,
    };
    cell.fitted = Some(fitted);
    if let Some(i) = cell.forecasts.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    cell.mae = Some(mae(&cell.actuals, &cell.forecasts)?);
    cell.rmse = Some(rmse(&cell.actuals, &cell.forecasts)?);
    cell.mape = Some(mape(&cell.actuals, &cell.forecasts)?);
    info!("{} {} {}: {} mae={:.6}", cell.model, cell.asset, cell.period, cell.spec, cell.mae.unwrap_or(f64::NAN));
    Ok(())
}

/// Runs every (period, asset, model) cell. Cell failures are recorded, not
/// propagated; cells run in parallel but each depends only on its own seed.
pub fn run_benchmark(assets: &[PriceSeries], periods: &[PeriodSpec], cfg: &BenchmarkConfig) -> Result<BenchmarkGrid> {
    if !(cfg.ratio > 0.0 && cfg.ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("split ratio {} not in (0, 1)", cfg.ratio)));
    }
    if assets.is_empty() || periods.is_empty() || cfg.models.is_empty() {
        return Err(Error::InvalidParameter("benchmark needs assets, periods and models".into()));
    }
    let mut models = cfg.models.clone();
    models.sort();
    models.dedup();
    let mut jobs: Vec<(&PriceSeries, &PeriodSpec, ModelKind)> = Vec::new();
    for p in periods {
        for a in assets {
            jobs.extend(models.iter().map(|&m| (a, p, m)));
        }
    }
    let mut cells: Vec<ForecastEval> = jobs.par_iter().map(|&(a, p, m)| evaluate_cell(a, p, m, cfg)).collect();
    let avg_rel_mae = relative_errors(&mut cells, periods, ModelKind::Arima);
    Ok(BenchmarkGrid { benchmark_model: ModelKind::Arima, mode: cfg.mode, cells, avg_rel_mae })
}

fn relative_errors(cells: &mut [ForecastEval], periods: &[PeriodSpec], bench: ModelKind) -> Vec<RelMaeEntry> {
    let bench_mae = |cells: &[ForecastEval], asset: &str, period: &str| {
        cells.iter().find(|c| c.model == bench && c.asset == asset && c.period == period).and_then(|c| c.mae)
    };
    if !cells.iter().any(|c| c.model == bench) {
        return Vec::new();
    }
    let mut entries = Vec::new();
    // per-cell ratios
    let per_cell: Vec<(usize, Option<f64>, Option<f64>)> =
        cells.iter().enumerate().map(|(i, c)| (i, c.mae, bench_mae(cells, &c.asset, &c.period))).collect();
    for (i, m, b) in per_cell {
        let c = &mut cells[i];
        let (value, error) = match (m, b) {
            (Some(m), Some(b)) => match avg_rel_mae(&[m], &[b]) {
                Ok(v) => (Some(v), None),
                Err(e) => (None, Some(e.to_string())),
            },
            (None, _) => (None, Some("model cell failed".to_string())),
            (_, None) => (None, Some("benchmark cell failed".to_string())),
        };
        c.avg_rel_mae = value;
        entries.push(RelMaeEntry {
            model: c.model,
            period: c.period.clone(),
            asset: Some(c.asset.clone()),
            n: 1,
            value,
            error,
        });
    }
    // pooled over assets
    let mut models: Vec<ModelKind> = cells.iter().map(|c| c.model).collect();
    models.sort();
    models.dedup();
    for p in periods {
        for &m in &models {
            let (mut num, mut den) = (Vec::new(), Vec::new());
            for c in cells.iter().filter(|c| c.model == m && c.period == p.label) {
                if let (Some(a), Some(b)) = (c.mae, bench_mae(cells, &c.asset, &c.period)) {
                    num.push(a);
                    den.push(b);
                }
            }
            let (value, error) = if num.is_empty() {
                (None, Some("no complete asset pairs".to_string()))
            } else {
                match avg_rel_mae(&num, &den) {
                    Ok(v) => (Some(v), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            };
            entries.push(RelMaeEntry { model: m, period: p.label.clone(), asset: None, n: num.len(), value, error });
        }
    }
    entries
}
