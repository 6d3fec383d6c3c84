//! Forecasting toolkit for daily market prices: ARIMA, hybrid ETS-LSTM and
//! kNN forecasters, unit-root and normality diagnostics, and a benchmark
//! harness producing error grids over assets and sample periods.

pub mod adf;
pub mod arima;
pub mod benchmark;
pub mod descriptive;
pub mod error;
pub mod ets;
pub mod forecaster;
pub mod hybrid;
pub mod knn;
pub mod lstm;
pub mod market_data;
pub mod metrics;
mod ols;
mod optim;
pub mod preprocess;
pub mod report;

pub use error::{Error, Result};
