//! Lag-embedded k-nearest-neighbour regression: the forecast is the uniform
//! mean of the successors of the `k` training windows closest (Euclidean) to
//! the query, found by exhaustive search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnConfig {
    pub k: usize,
    pub embed: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5, embed: 5 }
    }
}

/// Neighbour counts tuned per asset and period for the default market set.
/// Columns: 2018-2021, 2018, 2019, 2020, 2021.
const TUNED_K: [(&str, [usize; 5]); 6] = [
    ("BTC-USD", [26, 27, 26, 9, 27]),
    ("GDAXI", [19, 27, 18, 21, 18]),
    ("FTSE", [25, 27, 27, 16, 25]),
    ("N100", [27, 20, 23, 27, 21]),
    ("FCHI", [14, 24, 20, 6, 18]),
    ("SSMI", [27, 22, 15, 14, 27]),
];

fn normalize_asset(a: &str) -> String {
    a.trim_start_matches('^').to_ascii_uppercase()
}

/// Published `k` for a known asset and period label, if any.
pub fn tuned_k(asset: &str, period_label: &str) -> Option<usize> {
    let col = match period_label {
        "2018-2021" => 0,
        "2018" => 1,
        "2019" => 2,
        "2020" => 3,
        "2021" => 4,
        _ => return None,
    };
    let key = normalize_asset(asset);
    TUNED_K.iter().find(|(a, _)| *a == key).map(|(_, ks)| ks[col])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub config: KnnConfig,
    patterns: Vec<Vec<f64>>,
    successors: Vec<f64>,
    tail: Vec<f64>,
}

pub fn fit_knn(y: &[f64], cfg: KnnConfig) -> Result<KnnModel> {
    if cfg.k == 0 || cfg.embed == 0 {
        return Err(Error::InvalidParameter(format!("kNN needs k, m >= 1, got {cfg:?}")));
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let m = cfg.embed;
    let available = y.len().saturating_sub(m);
    if available < cfg.k {
        return Err(Error::InsufficientData { what: "kNN training patterns", needed: cfg.k, got: available });
    }
    Ok(KnnModel {
        config: cfg,
        patterns: y.windows(m).take(available).map(<[f64]>::to_vec).collect(),
        successors: y[m..].to_vec(),
        tail: y[y.len() - m..].to_vec(),
    })
}

impl KnnModel {
    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    pub fn successors(&self) -> &[f64] {
        &self.successors
    }

    pub fn predict(&self, query: &[f64]) -> Result<f64> {
        if query.len() != self.config.embed {
            return Err(Error::LengthMismatch { left: query.len(), right: self.config.embed });
        }
        let mut dist: Vec<(f64, usize)> = self
            .patterns
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        let k = self.config.k;
        // (distance, index) is a strict total order, so ties go to the earlier pattern
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, cmp);
            dist.truncate(k);
        }
        dist.sort_unstable_by(cmp);
        // anchored at the nearest successor so that identical successors
        // average to themselves exactly
        let anchor = self.successors[dist[0].1];
        let spread: f64 = dist.iter().map(|&(_, i)| self.successors[i] - anchor).sum();
        Ok(anchor + spread / k as f64)
    }

    /// Iterated forecast from the last `m` training values.
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        if h == 0 {
            return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        let m = self.config.embed;
        let mut buf = self.tail.clone();
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let next = self.predict(&buf[buf.len() - m..])?;
            out.push(next);
            buf.push(next);
        }
        Ok(out)
    }

    /// One-step predictions with realised values fed back into the query;
    /// the stored patterns stay those of the training window.
    pub fn rolling_forecast(&self, actuals: &[f64]) -> Result<Vec<f64>> {
        let m = self.config.embed;
        let mut buf = self.tail.clone();
        buf.extend_from_slice(actuals);
        (0..actuals.len()).map(|t| self.predict(&buf[t..t + m])).collect()
    }
}

pub fn predict_knn(model: &KnnModel, query: &[f64]) -> Result<f64> {
    model.predict(query)
}

pub fn forecast_knn(model: &KnnModel, h: usize) -> Result<Vec<f64>> {
    model.forecast(h)
}
