//! Non-seasonal ARIMA(p, d, q) by conditional sum of squares.
//!
//! Model on the `d`-times differenced, mean-adjusted series `z`:
//!
//! ```text
//! z[t] = sum_i ar[i] * z[t-i] + e[t] + sum_j ma[j] * e[t-j]
//! ```
//!
//! Innovations before the conditioning start are zero. Coefficients are
//! optimised in an unconstrained space mapped through partial
//! autocorrelations (`tanh` + Durbin-Levinson), so every iterate is
//! stationary and invertible. Optima pressed against the unit circle are
//! rejected rather than returned.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adf::{adf_test, SignificanceLevel};
use crate::error::{Error, Result};
use crate::ols::ols;
use crate::optim::{minimize_bfgs, BfgsOptions};

pub const MAX_AR: usize = 5;
pub const MAX_MA: usize = 5;
pub const MAX_D: usize = 1;

/// Roots closer to the unit circle than this are treated as unit roots.
const ROOT_GUARD: f64 = 1.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArimaOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
}

impl ArimaOrder {
    pub fn new(p: usize, d: usize, q: usize) -> Result<Self> {
        if p > MAX_AR || q > MAX_MA || d > MAX_D {
            return Err(Error::InvalidParameter(format!(
                "ARIMA order ({p}, {d}, {q}) outside p <= {MAX_AR}, d <= {MAX_D}, q <= {MAX_MA}"
            )));
        }
        Ok(Self { p, d, q })
    }

    pub fn n_coefficients(&self) -> usize {
        self.p + self.q
    }
}

impl fmt::Display for ArimaOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.p, self.d, self.q)
    }
}

/// Filter state needed to continue the innovation recursion past the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FilterState {
    /// Most recent mean-adjusted differenced values, oldest first (length p).
    z_tail: Vec<f64>,
    /// Most recent innovations, oldest first (length q).
    e_tail: Vec<f64>,
    /// Last observed level (used to integrate forecasts when d = 1).
    last_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: ArimaOrder,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    /// Mean of the differenced series; zero when d = 1.
    pub intercept: f64,
    pub sigma2: f64,
    pub aic: f64,
    /// Number of innovations entering the sum of squares.
    pub n_eff: usize,
    /// Index (in the differenced series) of the first scored innovation.
    pub css_start: usize,
    state: FilterState,
}

fn difference(y: &[f64], d: usize) -> Vec<f64> {
    let mut w = y.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    w
}

/// Inverts a single difference given the level preceding the first change.
pub fn integrate(start_level: f64, diffs: &[f64]) -> Vec<f64> {
    diffs
        .iter()
        .scan(start_level, |lvl, dv| {
            *lvl += dv;
            Some(*lvl)
        })
        .collect()
}

/// Durbin-Levinson map from partial autocorrelations to AR coefficients of
/// `1 - a1 B - ... - ak B^k`.
fn pacf_to_coefs(r: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = Vec::with_capacity(r.len());
    for (k, &rk) in r.iter().enumerate() {
        let prev = a.clone();
        for j in 0..k {
            a[j] = prev[j] - rk * prev[k - 1 - j];
        }
        a.push(rk);
    }
    a
}

/// Inverse of [`pacf_to_coefs`]; `None` when the polynomial is not stationary.
fn coefs_to_pacf(a: &[f64]) -> Option<Vec<f64>> {
    let mut cur = a.to_vec();
    let mut r = vec![0.0; a.len()];
    for k in (0..a.len()).rev() {
        let rk = cur[k];
        if !(rk.abs() < 1.0) {
            return None;
        }
        r[k] = rk;
        let denom = 1.0 - rk * rk;
        let prev: Vec<f64> = (0..k).map(|j| (cur[j] + rk * cur[k - 1 - j]) / denom).collect();
        cur = prev;
    }
    Some(r)
}

fn unconstrained_to_coefs(u: &[f64], p: usize) -> (Vec<f64>, Vec<f64>) {
    let r_ar: Vec<f64> = u[..p].iter().map(|v| v.tanh()).collect();
    let r_ma: Vec<f64> = u[p..].iter().map(|v| v.tanh()).collect();
    let ar = pacf_to_coefs(&r_ar);
    let ma = pacf_to_coefs(&r_ma).into_iter().map(|v| -v).collect();
    (ar, ma)
}

fn coefs_to_unconstrained(ar: &[f64], ma: &[f64], clamp: f64) -> Vec<f64> {
    let to_u = |a: &[f64]| -> Vec<f64> {
        match coefs_to_pacf(a) {
            Some(r) => r.iter().map(|v| v.clamp(-clamp, clamp).atanh()).collect(),
            None => vec![0.0; a.len()],
        }
    };
    let neg_ma: Vec<f64> = ma.iter().map(|v| -v).collect();
    let mut u = to_u(ar);
    u.extend(to_u(&neg_ma));
    u
}

/// Smallest root modulus of `1 - c1 z - ... - ck z^k` (infinity when k = 0).
fn min_root_modulus(c: &[f64]) -> f64 {
    let Some(last) = c.iter().rposition(|v| *v != 0.0) else {
        return f64::INFINITY;
    };
    let k_eff = last + 1;
    // companion of x^k - c1 x^(k-1) - ... - ck; its eigenvalues are inverse roots
    let comp = DMatrix::from_fn(k_eff, k_eff, |i, j| {
        if i == 0 {
            c[j]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let max_eig = comp.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max_eig == 0.0 {
        f64::INFINITY
    } else {
        1.0 / max_eig
    }
}

/// Innovations for `t >= start`, zero before. Returns (residuals, sse).
fn css_residuals(z: &[f64], ar: &[f64], ma: &[f64], start: usize) -> (Vec<f64>, f64) {
    let n = z.len();
    let mut e = vec![0.0; n];
    let mut sse = 0.0;
    for t in start..n {
        let mut pred = 0.0;
        for (i, a) in ar.iter().enumerate() {
            pred += a * z[t - 1 - i];
        }
        for (j, m) in ma.iter().enumerate() {
            if t > j {
                pred += m * e[t - 1 - j];
            }
        }
        let et = z[t] - pred;
        e[t] = et;
        sse += et * et;
    }
    (e, sse)
}

fn gaussian_css_aic(n_eff: usize, sigma2: f64, order: ArimaOrder) -> f64 {
    n_eff as f64 * sigma2.ln() + 2.0 * (order.n_coefficients() + 2) as f64
}

/// Hannan-Rissanen two-stage regression estimates, or `None` when the
/// regressions are not identifiable on this sample.
fn hannan_rissanen(z: &[f64], p: usize, q: usize) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = z.len();
    if p + q == 0 {
        return Some((vec![], vec![]));
    }
    let long = if q == 0 { 0 } else { (p.max(q) + 5).min(n / 4) };
    let e_hat: Vec<f64> = if q == 0 {
        vec![0.0; n]
    } else {
        if long == 0 {
            return None;
        }
        let rows = n - long;
        let x = DMatrix::from_fn(rows, long, |r, c| z[long + r - 1 - c]);
        let y = DVector::from_fn(rows, |r, _| z[long + r]);
        let fit = ols(&x, &y).ok()?;
        let mut e = vec![0.0; n];
        for t in long..n {
            let pred: f64 = (0..long).map(|c| fit.coef[c] * z[t - 1 - c]).sum();
            e[t] = z[t] - pred;
        }
        e
    };
    let first = (long + q).max(p);
    if n <= first + p + q + 1 {
        return None;
    }
    let rows = n - first;
    let x = DMatrix::from_fn(rows, p + q, |r, c| {
        let t = first + r;
        if c < p {
            z[t - 1 - c]
        } else {
            e_hat[t - 1 - (c - p)]
        }
    });
    let y = DVector::from_fn(rows, |r, _| z[first + r]);
    let fit = ols(&x, &y).ok()?;
    Some((fit.coef[..p].to_vec(), fit.coef[p..].to_vec()))
}

#[derive(Debug, Clone, Copy)]
pub struct ArimaFitOptions {
    /// First scored innovation index in the differenced series; defaults to `p`.
    pub css_start: Option<usize>,
    pub max_iter: usize,
}

impl Default for ArimaFitOptions {
    fn default() -> Self {
        Self { css_start: None, max_iter: 500 }
    }
}

pub fn fit_arima(y: &[f64], order: ArimaOrder) -> Result<ArimaModel> {
    fit_arima_with(y, order, ArimaFitOptions::default())
}

pub fn fit_arima_with(y: &[f64], order: ArimaOrder, opts: ArimaFitOptions) -> Result<ArimaModel> {
    let order = ArimaOrder::new(order.p, order.d, order.q)?;
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let w = difference(y, order.d);
    let (p, q) = (order.p, order.q);
    let start = opts.css_start.unwrap_or(p).max(p);
    let needed = 10 + p + q;
    if w.len() < needed || w.len() <= start + p + q + 1 {
        return Err(Error::InsufficientData {
            what: "ARIMA fit (after differencing)",
            needed: needed.max(start + p + q + 2),
            got: w.len(),
        });
    }
    let intercept = if order.d == 0 { w.iter().sum::<f64>() / w.len() as f64 } else { 0.0 };
    let z: Vec<f64> = w.iter().map(|v| v - intercept).collect();
    let n_eff = z.len() - start;

    let objective = |u: &[f64]| -> f64 {
        let (ar, ma) = unconstrained_to_coefs(u, p);
        let (_, sse) = css_residuals(&z, &ar, &ma, start);
        if sse > 0.0 {
            (sse / n_eff as f64).ln()
        } else if sse == 0.0 {
            f64::MIN_POSITIVE.ln()
        } else {
            f64::INFINITY
        }
    };
    let bfgs = BfgsOptions { max_iter: opts.max_iter, ..BfgsOptions::default() };

    let k = p + q;
    let (ar, ma) = if k == 0 {
        (vec![], vec![])
    } else {
        let mut starts = vec![vec![0.0; k]];
        if let Some((har, hma)) = hannan_rissanen(&z, p, q) {
            starts.push(coefs_to_unconstrained(&har, &hma, 0.95));
        }
        let mut best: Option<crate::optim::Minimum> = None;
        for s in &starts {
            let m = minimize_bfgs(objective, s, bfgs);
            if m.f.is_finite() && m.converged && best.as_ref().is_none_or(|b| m.f < b.f) {
                best = Some(m);
            }
        }
        let best = best.ok_or_else(|| Error::NonConvergence(format!("ARIMA{order}: no start converged")))?;
        let (ar, ma) = unconstrained_to_coefs(&best.x, p);
        if min_root_modulus(&ar) > ROOT_GUARD
            && min_root_modulus(&ma.iter().map(|v| -v).collect::<Vec<_>>()) > ROOT_GUARD
        {
            (ar, ma)
        } else {
            // one retry from a start pulled toward the origin
            let retry_start: Vec<f64> = best.x.iter().map(|v| 0.5 * v).collect();
            let m = minimize_bfgs(objective, &retry_start, bfgs);
            let (ar2, ma2) = unconstrained_to_coefs(&m.x, p);
            let ar_mod = min_root_modulus(&ar2);
            let ma_mod = min_root_modulus(&ma2.iter().map(|v| -v).collect::<Vec<_>>());
            if !(m.converged && m.f.is_finite()) {
                return Err(Error::NonConvergence(format!("ARIMA{order}: retry failed")));
            }
            if ar_mod <= ROOT_GUARD {
                return Err(Error::NonStationary(ar_mod));
            }
            if ma_mod <= ROOT_GUARD {
                return Err(Error::NonInvertible(ma_mod));
            }
            (ar2, ma2)
        }
    };
    ArimaModel::assemble(order, ar, ma, intercept, y, start)
}

impl ArimaModel {
    /// Builds a model from given coefficients, running the innovation filter
    /// over `y` to obtain the residual variance and forecast state.
    pub fn from_coefficients(order: ArimaOrder, ar: Vec<f64>, ma: Vec<f64>, intercept: f64, y: &[f64]) -> Result<Self> {
        let order = ArimaOrder::new(order.p, order.d, order.q)?;
        if ar.len() != order.p || ma.len() != order.q {
            return Err(Error::InvalidParameter(format!(
                "coefficient counts ({}, {}) do not match order {order}",
                ar.len(),
                ma.len()
            )));
        }
        let intercept = if order.d == 0 { intercept } else { 0.0 };
        let w_len = y.len().saturating_sub(order.d);
        if w_len <= order.p + 1 {
            return Err(Error::InsufficientData { what: "ARIMA filter", needed: order.p + order.d + 2, got: y.len() });
        }
        Self::assemble(order, ar, ma, intercept, y, order.p)
    }

    fn assemble(
        order: ArimaOrder,
        ar: Vec<f64>,
        ma: Vec<f64>,
        intercept: f64,
        y: &[f64],
        start: usize,
    ) -> Result<Self> {
        let w = difference(y, order.d);
        let z: Vec<f64> = w.iter().map(|v| v - intercept).collect();
        let (e, sse) = css_residuals(&z, &ar, &ma, start);
        let n_eff = z.len() - start;
        let sigma2 = sse / n_eff as f64;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::SingularRegression("zero or non-finite innovation variance"));
        }
        let state = FilterState {
            z_tail: z[z.len() - order.p..].to_vec(),
            e_tail: e[e.len() - order.q..].to_vec(),
            last_level: y[y.len() - 1],
        };
        Ok(Self {
            order,
            aic: gaussian_css_aic(n_eff, sigma2, order),
            ar,
            ma,
            intercept,
            sigma2,
            n_eff,
            css_start: start,
            state,
        })
    }

    fn predict_z(&self, z_tail: &[f64], e_tail: &[f64]) -> f64 {
        let mut pred = 0.0;
        for (i, a) in self.ar.iter().enumerate() {
            pred += a * z_tail[z_tail.len() - 1 - i];
        }
        for (j, m) in self.ma.iter().enumerate() {
            pred += m * e_tail[e_tail.len() - 1 - j];
        }
        pred
    }

    fn to_level(&self, z: f64, prev_level: f64) -> f64 {
        let w = z + self.intercept;
        if self.order.d == 1 {
            prev_level + w
        } else {
            w
        }
    }

    /// Iterated-expectation forecasts on the original scale.
    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        if h == 0 {
            return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        let mut z_tail = self.state.z_tail.clone();
        let mut e_tail = self.state.e_tail.clone();
        let mut level = self.state.last_level;
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let zh = self.predict_z(&z_tail, &e_tail);
            level = self.to_level(zh, level);
            out.push(level);
            if self.order.p > 0 {
                z_tail.remove(0);
                z_tail.push(zh);
            }
            if self.order.q > 0 {
                e_tail.remove(0);
                e_tail.push(0.0);
            }
        }
        Ok(out)
    }

    /// One-step-ahead forecasts with each realised value fed back before the
    /// next step; coefficients are not re-estimated.
    pub fn rolling_forecast(&self, actuals: &[f64]) -> Vec<f64> {
        let mut z_tail = self.state.z_tail.clone();
        let mut e_tail = self.state.e_tail.clone();
        let mut level = self.state.last_level;
        let mut out = Vec::with_capacity(actuals.len());
        for &y in actuals {
            let zh = self.predict_z(&z_tail, &e_tail);
            out.push(self.to_level(zh, level));
            let w = if self.order.d == 1 { y - level } else { y };
            let z = w - self.intercept;
            let e = z - zh;
            if self.order.p > 0 {
                z_tail.remove(0);
                z_tail.push(z);
            }
            if self.order.q > 0 {
                e_tail.remove(0);
                e_tail.push(e);
            }
            level = y;
        }
        out
    }

    /// Mean of the process on the differenced scale.
    pub fn unconditional_mean(&self) -> f64 {
        self.intercept
    }
}

/// How the differencing order is chosen when the grid offers both d = 0 and d = 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DifferencingRule {
    /// d = 0 iff the ADF test rejects a unit root in the levels at this level.
    AdfTest(SignificanceLevel),
    /// Compare AIC across differencing orders as well.
    Aic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderGrid {
    pub max_p: usize,
    pub max_q: usize,
    pub d_values: Vec<usize>,
    pub d_rule: DifferencingRule,
}

impl Default for OrderGrid {
    fn default() -> Self {
        Self {
            max_p: MAX_AR,
            max_q: MAX_MA,
            d_values: vec![0, 1],
            d_rule: DifferencingRule::AdfTest(SignificanceLevel::P05),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFit {
    pub order: ArimaOrder,
    pub aic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct OrderSearch {
    pub best: ArimaModel,
    pub candidates: Vec<CandidateFit>,
}

pub fn select_order(y: &[f64], grid: &OrderGrid) -> Result<ArimaModel> {
    search_orders(y, grid).map(|s| s.best)
}

/// Fits every grid order that survives the differencing rule and keeps the
/// minimum-AIC model. All candidates with the same d are scored on the same
/// innovations (conditioning start `max_p`), so their AICs are comparable.
/// Ties go to fewer coefficients, then lower q.
pub fn search_orders(y: &[f64], grid: &OrderGrid) -> Result<OrderSearch> {
    if grid.max_p > MAX_AR || grid.max_q > MAX_MA || grid.d_values.is_empty() {
        return Err(Error::InvalidParameter(format!("invalid order grid {grid:?}")));
    }
    let mut d_values = grid.d_values.clone();
    d_values.sort_unstable();
    d_values.dedup();
    if let DifferencingRule::AdfTest(level) = grid.d_rule {
        if d_values.len() > 1 {
            let stationary = adf_test(y, None).map(|r| r.rejects_at(level)).unwrap_or(false);
            d_values = vec![if stationary { d_values[0] } else { d_values[1] }];
        }
    }
    let opts = ArimaFitOptions { css_start: Some(grid.max_p), ..ArimaFitOptions::default() };
    let mut candidates = Vec::new();
    let mut best: Option<ArimaModel> = None;
    for &d in &d_values {
        for p in 0..=grid.max_p {
            for q in 0..=grid.max_q {
                let order = ArimaOrder::new(p, d, q)?;
                match fit_arima_with(y, order, opts) {
                    Ok(m) => {
                        candidates.push(CandidateFit { order, aic: Some(m.aic), error: None });
                        let better = match &best {
                            None => true,
                            Some(b) => {
                                let key = |o: &ArimaOrder| (o.n_coefficients(), o.q);
                                m.aic < b.aic || (m.aic == b.aic && key(&m.order) < key(&b.order))
                            }
                        };
                        if better {
                            best = Some(m);
                        }
                    }
                    Err(e) => candidates.push(CandidateFit { order, aic: None, error: Some(e.to_string()) }),
                }
            }
        }
    }
    let best = best.ok_or(Error::NoModelConverged)?;
    Ok(OrderSearch { best, candidates })
}
