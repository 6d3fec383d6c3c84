mod common;

use common::*;
use marketcast::arima::{fit_arima, ArimaOrder, OrderGrid};
use marketcast::benchmark::{run_benchmark, BenchmarkConfig, EvalMode};
use marketcast::ets::fit_ets;
use marketcast::forecaster::{ModelKind, ModelSettings};
use marketcast::hybrid::fit_hybrid;
use marketcast::knn::{fit_knn, KnnConfig};
use marketcast::lstm::{self, NetConfig};
use marketcast::market_data::{slice_period, train_len, PeriodSpec, PriceSeries};
use marketcast::metrics::{avg_rel_mae, mae, mape, rmse};
use rand::Rng;

#[test]
fn metrics_match_direct_summation() {
    let mut r = rng(7);
    for _ in 0..200 {
        let (a, f) = metric_case(&mut r);
        assert!(rel_err(mae(&a, &f).unwrap(), oracle_mae(&a, &f)) < 1e-12);
        assert!(rel_err(rmse(&a, &f).unwrap(), oracle_rmse(&a, &f)) < 1e-12);
        assert!(rel_err(mape(&a, &f).unwrap(), oracle_mape(&a, &f)) < 1e-12);
        let b: Vec<f64> = a.iter().map(|_| r.random_range(0.5..5.0)).collect();
        let m: Vec<f64> = a.iter().map(|_| r.random_range(0.5..5.0)).collect();
        assert!(rel_err(avg_rel_mae(&m, &b).unwrap(), oracle_avg_rel_mae(&m, &b)) < 1e-12);
    }
}

#[test]
fn knn_matches_exhaustive_search() {
    let mut r = rng(3);
    for s in 0..20 {
        let n = r.random_range(30..120);
        // coarse rounding produces many tied distances
        let y: Vec<f64> = normals(n, s).iter().map(|v| (v * 2.0).round()).collect();
        for m in 1..=4 {
            for k in [1, 3, 7] {
                if n - m < k {
                    continue;
                }
                let model = fit_knn(&y, KnnConfig { k, embed: m }).unwrap();
                let q: Vec<f64> = (0..m).map(|_| r.random_range(-3i32..=3) as f64).collect();
                assert_eq!(model.predict(&q).unwrap(), oracle_knn(&y, k, m, &q));
            }
        }
    }
}

#[test]
fn random_walk_order_gives_flat_forecast() {
    let y: Vec<f64> = random_walk(400, 5).iter().map(|v| 100.0 + v).collect();
    let (train, test) = y.split_at(320);
    let m = fit_arima(train, ArimaOrder::new(0, 1, 0).unwrap()).unwrap();
    let f = m.forecast(test.len()).unwrap();
    let last = *train.last().unwrap();
    assert!(f.iter().all(|&v| v == last));
    let expected = test.iter().map(|v| (v - last).abs()).sum::<f64>() / test.len() as f64;
    assert!(rel_err(mae(test, &f).unwrap(), expected) < 1e-12);
}

fn small_settings() -> ModelSettings {
    ModelSettings {
        arima_grid: OrderGrid { max_p: 2, max_q: 2, ..OrderGrid::default() },
        net: NetConfig { hidden_units: 6, epochs: 3, ..NetConfig::default() },
        ..ModelSettings::default()
    }
}

/// Overwrites every price of `period` after the training cut-off.
fn poison_test_window(s: &PriceSeries, period: &PeriodSpec, ratio: f64, from_offset: usize) -> PriceSeries {
    let sliced = slice_period(s, period).unwrap();
    let cut = *sliced.dates().get(train_len(sliced.len(), ratio) + from_offset).unwrap();
    let closes = s
        .dates()
        .iter()
        .zip(s.closes())
        .map(|(d, &c)| if *d >= cut && period.contains(*d) { c * 3.0 + 17.0 } else { c })
        .collect();
    PriceSeries::new(s.asset_id(), s.dates().to_vec(), closes).unwrap()
}

#[test]
fn static_forecasts_never_see_the_test_window() {
    let period = PeriodSpec::year(2019);
    let cfg = BenchmarkConfig { settings: small_settings(), ..BenchmarkConfig::default() };
    let clean = vec![gbm_series("FCHI", 5000.0, 0.01, false, 1)];
    let dirty = vec![poison_test_window(&clean[0], &period, cfg.ratio, 0)];
    let a = run_benchmark(&clean, std::slice::from_ref(&period), &cfg).unwrap();
    let b = run_benchmark(&dirty, &[period], &cfg).unwrap();
    for kind in ModelKind::ALL {
        let (ca, cb) = (a.cell(kind, "FCHI", "2019").unwrap(), b.cell(kind, "FCHI", "2019").unwrap());
        assert!(ca.is_ok(), "{kind}: {:?}", ca.error);
        assert_eq!(ca.forecasts, cb.forecasts, "{kind}");
        assert_ne!(ca.actuals, cb.actuals);
    }
}

#[test]
fn rolling_forecasts_only_see_the_past() {
    let period = PeriodSpec::year(2020);
    let cfg = BenchmarkConfig { settings: small_settings(), mode: EvalMode::Rolling, ..BenchmarkConfig::default() };
    let clean = vec![gbm_series("SSMI", 9000.0, 0.01, false, 2)];
    let sliced = slice_period(&clean[0], &period).unwrap();
    let n_test = sliced.len() - train_len(sliced.len(), cfg.ratio);
    // only the final realised value changes, which no forecast may depend on
    let dirty = vec![poison_test_window(&clean[0], &period, cfg.ratio, n_test - 1)];
    let a = run_benchmark(&clean, std::slice::from_ref(&period), &cfg).unwrap();
    let b = run_benchmark(&dirty, &[period], &cfg).unwrap();
    for kind in ModelKind::ALL {
        let (ca, cb) = (a.cell(kind, "SSMI", "2020").unwrap(), b.cell(kind, "SSMI", "2020").unwrap());
        assert!(ca.is_ok(), "{kind}: {:?}", ca.error);
        assert_eq!(ca.forecasts, cb.forecasts, "{kind}");
        assert_eq!(ca.actuals[..n_test - 1], cb.actuals[..n_test - 1]);
    }
}

/// Damped trend (phi = 0.9) plus a sinusoid, without noise.
fn damped_sine(n: usize) -> Vec<f64> {
    let (mut level, mut trend) = (100.0, 2.0);
    (0..n)
        .map(|t| {
            level += 0.9 * trend;
            trend *= 0.9;
            level + (0.3 * t as f64).sin()
        })
        .collect()
}

fn mse(a: &[f64], f: &[f64]) -> f64 {
    a.iter().zip(f).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn hybrid_cfg(seed: u64) -> NetConfig {
    NetConfig { hidden_units: 12, epochs: 80, learning_rate: 0.01, seed, ..NetConfig::default() }
}

#[test]
fn hybrid_fits_constructed_nonlinearity_better_than_ets() {
    let y = damped_sine(300);
    let h = fit_hybrid(&y, &hybrid_cfg(1)).unwrap();
    let w = h.nonlinear.window();
    let ets_fit = h.linear.fitted(&y).unwrap();
    let hyb_fit: Vec<f64> =
        (w..y.len()).map(|t| ets_fit[t] + h.nonlinear.predict_one(&h.residuals[t - w..t]).unwrap()).collect();
    let (hyb, ets) = (mse(&y[w..], &hyb_fit), mse(&y[w..], &ets_fit[w..]));
    assert!(hyb < ets, "hybrid {hyb} vs ets {ets}");
}

#[test]
fn hybrid_static_forecast_not_worse_than_ets() {
    let y = damped_sine(310);
    let (train, truth) = y.split_at(300);
    let h = fit_hybrid(train, &hybrid_cfg(1)).unwrap();
    let hs = h.forecast(10).unwrap();
    let es = fit_ets(train).unwrap().forecast(10).unwrap();
    let (hm, em) = (mae(truth, &hs).unwrap(), mae(truth, &es).unwrap());
    assert!(hm <= em, "hybrid {hm} vs ets {em}");
}

#[test]
fn hybrid_rolling_beats_ets_rolling() {
    let y = damped_sine(360);
    let (train, test) = y.split_at(300);
    let h = fit_hybrid(train, &hybrid_cfg(2)).unwrap();
    let rolled = h.rolling_forecast(test).unwrap();
    assert_eq!(rolled.linear, h.linear.rolling_forecast(test));
    let (hyb, ets) = (mse(test, &rolled.total), mse(test, &rolled.linear));
    assert!(hyb < 0.5 * ets, "hybrid {hyb} vs ets {ets}");
}

#[test]
fn hybrid_is_level_equivariant() {
    let y: Vec<f64> = damped_sine(200).iter().zip(normals(200, 9)).map(|(v, e)| v + 0.2 * e).collect();
    let shifted: Vec<f64> = y.iter().map(|v| v + 1000.0).collect();
    let cfg = NetConfig { hidden_units: 6, epochs: 10, seed: 3, ..NetConfig::default() };
    let a = fit_hybrid(&y, &cfg).unwrap().forecast(15).unwrap();
    let b = fit_hybrid(&shifted, &cfg).unwrap().forecast(15).unwrap();
    for (u, v) in a.iter().zip(&b) {
        assert!((u + 1000.0 - v).abs() < 1e-5, "{u} {v}");
    }
}

fn sine(range: std::ops::Range<usize>) -> Vec<f64> {
    range.map(|t| (0.3 * t as f64).sin()).collect()
}

#[test]
fn lstm_learns_a_sine() {
    let e = sine(0..300);
    let cfg = NetConfig { hidden_units: 10, epochs: 60, learning_rate: 0.01, seed: 5, ..NetConfig::default() };
    let net = lstm::train(&e, &cfg).unwrap();
    let trace = net.loss_trace();
    assert_eq!(trace.len(), cfg.epochs);
    assert!(trace[trace.len() - 1] < 0.25 * trace[0], "{trace:?}");
    let f = net.predict_residuals(&e[e.len() - 10..], 5).unwrap();
    let err = mae(&sine(300..305), &f).unwrap();
    assert!(err < 0.3, "{err}");
}
