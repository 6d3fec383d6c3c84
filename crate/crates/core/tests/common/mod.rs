#![allow(dead_code)]

use chrono::{Datelike, NaiveDate, Weekday};
use marketcast::market_data::PriceSeries;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| StandardNormal.sample(&mut r)).collect()
}

pub fn random_walk(n: usize, seed: u64) -> Vec<f64> {
    let mut level = 0.0;
    normals(n, seed)
        .into_iter()
        .map(|e| {
            level += e;
            level
        })
        .collect()
}

/// Calendar dates from 2018-01-01 to 2021-12-31, weekdays only unless `daily`.
pub fn window_dates(daily: bool) -> Vec<NaiveDate> {
    let mut d = NaiveDate::from_ymd_opt(2018, 1, 1).unwrap();
    let end = NaiveDate::from_ymd_opt(2021, 12, 31).unwrap();
    let mut out = Vec::new();
    while d <= end {
        if daily || !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.succ_opt().unwrap();
    }
    out
}

/// Geometric Brownian motion prices over 2018-2021.
pub fn gbm_series(asset: &str, start: f64, vol: f64, daily: bool, seed: u64) -> PriceSeries {
    let dates = window_dates(daily);
    let mut p = start;
    let closes = normals(dates.len(), seed)
        .into_iter()
        .map(|z| {
            let v = p;
            p *= (vol * z).exp();
            v
        })
        .collect();
    PriceSeries::new(asset, dates, closes).unwrap()
}

/// Six synthetic assets shaped like the studied markets: one volatile
/// seven-day series and five correlated weekday indices.
pub fn synthetic_market(seed: u64) -> Vec<PriceSeries> {
    let mut out = vec![gbm_series("BTC-USD", 10_000.0, 0.04, true, seed)];
    for (i, (name, start)) in
        [("FCHI", 5000.0), ("FTSE", 7000.0), ("GDAXI", 12_000.0), ("N100", 1000.0), ("SSMI", 9000.0)]
            .into_iter()
            .enumerate()
    {
        out.push(gbm_series(name, start, 0.01, false, seed + 1 + i as u64));
    }
    out
}

// ---------------------------------------------------------------- oracles

pub fn oracle_mae(a: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - f[i]).abs();
    }
    s / a.len() as f64
}

pub fn oracle_rmse(a: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - f[i]).powi(2);
    }
    (s / a.len() as f64).sqrt()
}

pub fn oracle_mape(a: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += ((a[i] - f[i]) / a[i]).abs();
    }
    100.0 * s / a.len() as f64
}

/// Geometric mean as the n-th root of the product.
pub fn oracle_avg_rel_mae(m: &[f64], b: &[f64]) -> f64 {
    let mut prod = 1.0;
    for i in 0..m.len() {
        prod *= m[i] / b[i];
    }
    prod.powf(1.0 / m.len() as f64)
}

pub fn rel_err(x: f64, truth: f64) -> f64 {
    if x == truth {
        0.0
    } else {
        (x - truth).abs() / truth.abs().max(f64::MIN_POSITIVE)
    }
}

/// Random vectors for the metric oracle: positive actuals, nearby forecasts.
pub fn metric_case(r: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let n = r.random_range(1..=12);
    let a: Vec<f64> = (0..n).map(|_| r.random_range(1.0..500.0)).collect();
    let f: Vec<f64> = a.iter().map(|v| v * r.random_range(0.7..1.3)).collect();
    (a, f)
}

/// Exhaustive kNN: every pattern, a full stable sort on distance, and the
/// mean of the first `k` successors written relative to the nearest one.
pub fn oracle_knn(y: &[f64], k: usize, m: usize, query: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> = Vec::new();
    for i in 0..y.len() - m {
        let mut s = 0.0;
        for j in 0..m {
            s += (y[i + j] - query[j]) * (y[i + j] - query[j]);
        }
        d.push((s, i));
    }
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let anchor = y[d[0].1 + m];
    let mut spread = 0.0;
    for &(_, i) in &d[..k] {
        spread += y[i + m] - anchor;
    }
    anchor + spread / k as f64
}

/// Plain arithmetic mean of the same neighbour set.
pub fn oracle_knn_plain_mean(y: &[f64], k: usize, m: usize, query: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> =
        (0..y.len() - m).map(|i| ((0..m).map(|j| (y[i + j] - query[j]).powi(2)).sum(), i)).collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    d[..k].iter().map(|&(_, i)| y[i + m]).sum::<f64>() / k as f64
}
