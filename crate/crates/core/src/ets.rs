//! Additive-error, additive damped-trend exponential smoothing, ETS(A,Ad,N).
//!
//! ```text
//! e[t] = y[t] - (l[t-1] + phi * b[t-1])
//! l[t] = l[t-1] + phi * b[t-1] + alpha * e[t]
//! b[t] = phi * b[t-1] + beta * e[t]
//! ```
//!
//! Smoothing parameters and the initial states are estimated jointly by
//! minimising the in-sample sum of squared one-step errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{minimize_bfgs, BfgsOptions, Minimum};

pub const PHI_MIN: f64 = 0.8;
pub const PHI_MAX: f64 = 0.98;
pub const MIN_OBS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub l0: f64,
    pub b0: f64,
}

impl EtsParams {
    fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha <= 1.0
            && self.beta >= 0.0
            && self.beta <= self.alpha
            && (PHI_MIN..=PHI_MAX).contains(&self.phi)
            && self.l0.is_finite()
            && self.b0.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("ETS parameters out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsModel {
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub l0: f64,
    pub b0: f64,
    pub final_level: f64,
    pub final_trend: f64,
    pub sse: f64,
    pub n_obs: usize,
}

struct Pass {
    level: f64,
    trend: f64,
    sse: f64,
}

fn run(params: &EtsParams, y: &[f64], mut on_step: impl FnMut(f64, f64)) -> Pass {
    let EtsParams { alpha, beta, phi, l0, b0 } = *params;
    let (mut l, mut b) = (l0, b0);
    let mut sse = 0.0;
    for &yt in y {
        let fitted = l + phi * b;
        let e = yt - fitted;
        on_step(fitted, e);
        sse += e * e;
        l = fitted + alpha * e;
        b = phi * b + beta * e;
    }
    Pass { level: l, trend: b, sse }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Unconstrained coordinates: (logit alpha, logit beta/alpha, logit of phi
/// within its box, scaled offsets of l0 and b0 from their heuristic values).
struct Reparam {
    l_ref: f64,
    b_ref: f64,
    scale: f64,
}

impl Reparam {
    fn new(y: &[f64]) -> Self {
        let diffs: Vec<f64> = y.windows(2).map(|w| w[1] - w[0]).collect();
        let m = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        let scale = if sd > 0.0 { sd } else { y[0].abs().max(1.0) * 1e-3 };
        Self { l_ref: y[0], b_ref: y[1] - y[0], scale }
    }

    fn decode(&self, u: &[f64]) -> EtsParams {
        let alpha = logistic(u[0]);
        EtsParams {
            alpha,
            beta: alpha * logistic(u[1]),
            phi: PHI_MIN + (PHI_MAX - PHI_MIN) * logistic(u[2]),
            l0: self.l_ref + self.scale * u[3],
            b0: self.b_ref + self.scale * u[4],
        }
    }

    fn encode_smoothing(alpha: f64, beta: f64, phi: f64) -> Vec<f64> {
        vec![logit(alpha), logit(beta / alpha), logit((phi - PHI_MIN) / (PHI_MAX - PHI_MIN)), 0.0, 0.0]
    }
}

pub fn fit_ets(y: &[f64]) -> Result<EtsModel> {
    if y.len() < MIN_OBS {
        return Err(Error::InsufficientData { what: "ETS fit", needed: MIN_OBS, got: y.len() });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let rp = Reparam::new(y);
    let norm = y.len() as f64 * rp.scale * rp.scale;
    let objective = |u: &[f64]| run(&rp.decode(u), y, |_, _| {}).sse / norm;
    let opts = BfgsOptions::default();

    let mut best: Option<Minimum> = None;
    for alpha in [0.1, 0.5, 0.9] {
        for beta in [0.01, alpha / 2.0] {
            for phi in [0.85, 0.95] {
                let start = Reparam::encode_smoothing(alpha, beta, phi);
                let m = minimize_bfgs(objective, &start, opts);
                if m.f.is_finite() && best.as_ref().is_none_or(|b| m.f < b.f) {
                    best = Some(m);
                }
            }
        }
    }
    let best = best.ok_or_else(|| Error::NonConvergence("ETS: no finite optimum".into()))?;
    EtsModel::with_params(rp.decode(&best.x), y)
}

impl EtsModel {
    /// Runs the recursion over `y` with fixed parameters.
    pub fn with_params(params: EtsParams, y: &[f64]) -> Result<Self> {
        params.validate()?;
        if y.is_empty() {
            return Err(Error::InsufficientData { what: "ETS filter", needed: 1, got: 0 });
        }
        let pass = run(&params, y, |_, _| {});
        if !pass.sse.is_finite() {
            return Err(Error::NonConvergence("ETS recursion overflowed".into()));
        }
        Ok(Self {
            alpha: params.alpha,
            beta: params.beta,
            phi: params.phi,
            l0: params.l0,
            b0: params.b0,
            final_level: pass.level,
            final_trend: pass.trend,
            sse: pass.sse,
            n_obs: y.len(),
        })
    }

    pub fn params(&self) -> EtsParams {
        EtsParams { alpha: self.alpha, beta: self.beta, phi: self.phi, l0: self.l0, b0: self.b0 }
    }

    pub fn forecast(&self, h: usize) -> Result<Vec<f64>> {
        if h == 0 {
            return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        let mut out = Vec::with_capacity(h);
        let mut acc = 0.0;
        let mut pw = 1.0;
        for _ in 0..h {
            pw *= self.phi;
            acc += pw;
            out.push(self.final_level + acc * self.final_trend);
        }
        Ok(out)
    }

    /// Limit of the forecast path as the horizon grows.
    pub fn asymptote(&self) -> f64 {
        self.final_level + self.final_trend * self.phi / (1.0 - self.phi)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n_obs {
            return Err(Error::LengthMismatch { left: y.len(), right: self.n_obs });
        }
        Ok(())
    }

    /// One-step-ahead in-sample fitted values.
    pub fn fitted(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut out = Vec::with_capacity(y.len());
        run(&self.params(), y, |f, _| out.push(f));
        Ok(out)
    }

    /// `y[t]` minus its one-step-ahead fitted value.
    pub fn residuals(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_len(y)?;
        let mut out = Vec::with_capacity(y.len());
        run(&self.params(), y, |_, e| out.push(e));
        Ok(out)
    }

    /// Continues the recursion through `actuals`, returning the one-step
    /// prediction made before each value was observed.
    pub fn rolling_forecast(&self, actuals: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(actuals.len());
        let params = EtsParams { l0: self.final_level, b0: self.final_trend, ..self.params() };
        run(&params, actuals, |f, _| out.push(f));
        out
    }

    /// Advances `(level, trend)` by one observation, returning the new state
    /// and the one-step error.
    pub(crate) fn step_state(&self, level: f64, trend: f64, y: f64) -> (f64, f64, f64) {
        let fitted = level + self.phi * trend;
        let e = y - fitted;
        (fitted + self.alpha * e, self.phi * trend + self.beta * e, e)
    }
}

pub fn forecast_ets(m: &EtsModel, h: usize) -> Result<Vec<f64>> {
    m.forecast(h)
}

pub fn residuals_ets(m: &EtsModel, y: &[f64]) -> Result<Vec<f64>> {
    m.residuals(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y[t] = 10 + 2 * (phi + ... + phi^t), t = 1..=n
    fn damped_generator(n: usize, phi: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        let (mut acc, mut pw) = (0.0, 1.0);
        for _ in 0..n {
            pw *= phi;
            acc += pw;
            out.push(10.0 + 2.0 * acc);
        }
        out
    }

    #[test]
    fn noiseless_damped_trend_is_recovered() {
        let full = damped_generator(80, 0.9);
        let (train, cont) = full.split_at(60);
        let m = fit_ets(train).unwrap();
        assert!(m.sse < 1e-6, "{m:?}");
        let f = m.forecast(20).unwrap();
        for (a, b) in f.iter().zip(cont) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
        for r in m.residuals(train).unwrap() {
            assert!(r.abs() < 1e-3);
        }
    }

    #[test]
    fn constant_series_is_a_fixed_point() {
        let y = vec![5.0; 40];
        let m = fit_ets(&y).unwrap();
        for f in m.forecast(10).unwrap() {
            assert!((f - 5.0).abs() < 1e-6);
        }
        assert!(m.final_trend.abs() < 1e-6);
        let r = m.residuals(&y).unwrap();
        assert!(r[5..].iter().all(|e| e.abs() < 1e-6));
    }

    #[test]
    fn degenerate_parameters_give_flat_forecast() {
        let y: Vec<f64> = (0..30).map(|t| 20.0 + if t % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let p = EtsParams { alpha: 0.3, beta: 0.0, phi: PHI_MAX, l0: 20.0, b0: 0.0 };
        let m = EtsModel::with_params(p, &y).unwrap();
        let f = m.forecast(5).unwrap();
        assert!(f.iter().all(|v| *v == m.final_level));
    }

    #[test]
    fn forecast_formula_instances() {
        let p = EtsParams { alpha: 0.5, beta: 0.1, phi: 0.9, l0: 100.0, b0: 1.5 };
        let y: Vec<f64> = (0..15).map(|t| 100.0 + 1.3 * t as f64).collect();
        let m = EtsModel::with_params(p, &y).unwrap();
        let f = m.forecast(200).unwrap();
        let (l, b) = (m.final_level, m.final_trend);
        assert!((f[0] - (l + 0.9 * b)).abs() < 1e-12);
        assert!((f[1] - (l + (0.9 + 0.81) * b)).abs() < 1e-12);
        assert!((f[199] - m.asymptote()).abs() < 1e-6);
        // monotone toward the asymptote
        let sign = (m.asymptote() - f[0]).signum();
        assert!(f.windows(2).all(|w| (w[1] - w[0]) * sign >= 0.0));
        assert!(m.forecast(0).is_err());
    }

    #[test]
    fn residuals_reconstruct_series() {
        let y: Vec<f64> = (0..50).map(|t| 30.0 + (t as f64 * 0.7).sin() * 3.0 + 0.1 * t as f64).collect();
        let m = fit_ets(&y).unwrap();
        let fitted = m.fitted(&y).unwrap();
        let resid = residuals_ets(&m, &y).unwrap();
        for ((f, e), v) in fitted.iter().zip(&resid).zip(&y) {
            assert!((f + e - v).abs() <= 1e-12 * v.abs());
        }
        let sse: f64 = resid.iter().map(|e| e * e).sum();
        assert!((sse - m.sse).abs() < 1e-8);
        assert!(matches!(m.residuals(&y[1..]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn level_shift_equivariance() {
        let y: Vec<f64> = (0..60).map(|t| 12.0 + (t as f64 * 0.4).sin() + 0.05 * t as f64).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 64.0).collect();
        let a = fit_ets(&y).unwrap();
        let b = fit_ets(&shifted).unwrap();
        assert!((a.alpha - b.alpha).abs() < 1e-6);
        assert!((a.beta - b.beta).abs() < 1e-6);
        assert!((a.phi - b.phi).abs() < 1e-6);
        for (fa, fb) in a.forecast(10).unwrap().iter().zip(b.forecast(10).unwrap()) {
            assert!((fa + 64.0 - fb).abs() < 1e-6);
        }
    }

    #[test]
    fn rolling_matches_recursion() {
        let y: Vec<f64> = (0..40).map(|t| 5.0 + (t as f64 * 0.3).cos()).collect();
        let m = fit_ets(&y[..30]).unwrap();
        let roll = m.rolling_forecast(&y[30..]);
        assert_eq!(roll[0], m.forecast(1).unwrap()[0]);
        let full = EtsModel::with_params(m.params(), &y).unwrap();
        let fitted = full.fitted(&y).unwrap();
        for (a, b) in roll.iter().zip(&fitted[30..]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn too_short() {
        assert!(matches!(fit_ets(&[1.0; 9]), Err(Error::InsufficientData { .. })));
    }
}
