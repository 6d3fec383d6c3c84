//! Single-layer LSTM regressor for ETS residuals, trained with hand-written
//! backpropagation through time and Adam.
//!
//! Parameters live in one flat vector laid out as
//! `[W (4H), U (4H x H, row-major), b (4H), v (H), c]`, with gate rows in the
//! order input, forget, output, candidate. For a window `x[0..w]`:
//!
//! ```text
//! z_t = W x_t + U h_{t-1} + b
//! c_t = f * c_{t-1} + i * g        h_t = o * tanh(c_t)
//! y   = v . (mask * h_w) + c
//! ```
//!
//! `mask` is inverted dropout applied during training only.

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::MinMaxScaler;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetConfig {
    pub hidden_units: usize,
    pub dropout_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub window: usize,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            hidden_units: 50,
            dropout_rate: 0.2,
            epochs: 100,
            batch_size: 32,
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            window: 10,
            seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.hidden_units > 0
            && self.epochs > 0
            && self.batch_size > 0
            && self.window > 0
            && self.learning_rate > 0.0
            && self.epsilon > 0.0;
        let rates = (0.0..1.0).contains(&self.dropout_rate)
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2);
        if positive && rates {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("network config: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    h: usize,
}

impl Layout {
    fn w(self) -> std::ops::Range<usize> {
        0..4 * self.h
    }
    fn u(self) -> std::ops::Range<usize> {
        let s = 4 * self.h;
        s..s + 4 * self.h * self.h
    }
    fn b(self) -> std::ops::Range<usize> {
        let s = 4 * self.h + 4 * self.h * self.h;
        s..s + 4 * self.h
    }
    fn v(self) -> std::ops::Range<usize> {
        let s = 8 * self.h + 4 * self.h * self.h;
        s..s + self.h
    }
    fn c(self) -> usize {
        9 * self.h + 4 * self.h * self.h
    }
    fn len(self) -> usize {
        self.c() + 1
    }
}

/// Per-window activations kept for the backward pass.
#[derive(Default)]
struct Cache {
    gates: Vec<f64>,
    cs: Vec<f64>,
    hs: Vec<f64>,
    tc: Vec<f64>,
}

/// Reusable buffers for the backward pass.
#[derive(Default)]
struct Scratch {
    dh: Vec<f64>,
    dh_next: Vec<f64>,
    dc: Vec<f64>,
    dz: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn forward(p: &[f64], lay: Layout, x: &[f64], cache: &mut Cache) {
    let h = lay.h;
    let w = x.len();
    let Cache { gates, cs, hs, tc } = cache;
    gates.resize(w * 4 * h, 0.0);
    cs.resize((w + 1) * h, 0.0);
    hs.resize((w + 1) * h, 0.0);
    tc.resize(w * h, 0.0);
    cs[..h].fill(0.0);
    hs[..h].fill(0.0);
    let (pw, pu, pb) = (&p[lay.w()], &p[lay.u()], &p[lay.b()]);
    for (t, &xt) in x.iter().enumerate() {
        let z = &mut gates[t * 4 * h..(t + 1) * 4 * h];
        let hprev = &hs[t * h..(t + 1) * h];
        for r in 0..4 * h {
            z[r] = pw[r] * xt + pb[r] + dot(&pu[r * h..(r + 1) * h], hprev);
        }
        let (c_prev, c_rest) = cs[t * h..(t + 2) * h].split_at_mut(h);
        let h_next = &mut hs[(t + 1) * h..(t + 2) * h];
        let tct = &mut tc[t * h..(t + 1) * h];
        for j in 0..h {
            let i = sigmoid(z[j]);
            let f = sigmoid(z[h + j]);
            let o = sigmoid(z[2 * h + j]);
            let g = z[3 * h + j].tanh();
            z[j] = i;
            z[h + j] = f;
            z[2 * h + j] = o;
            z[3 * h + j] = g;
            let c = f * c_prev[j] + i * g;
            c_rest[j] = c;
            tct[j] = c.tanh();
            h_next[j] = o * tct[j];
        }
    }
}

fn last_hidden(cache: &Cache, h: usize) -> &[f64] {
    let n = cache.hs.len();
    &cache.hs[n - h..]
}

fn output(p: &[f64], lay: Layout, h_last: &[f64], mask: Option<&[f64]>) -> f64 {
    let v = &p[lay.v()];
    let s = match mask {
        Some(m) => v.iter().zip(h_last).zip(m).map(|((a, b), c)| a * b * c).sum(),
        None => dot(v, h_last),
    };
    s + p[lay.c()]
}

/// Accumulates into `grad` the gradient of `g_out * y(x)`.
fn backward(
    p: &[f64],
    lay: Layout,
    x: &[f64],
    cache: &Cache,
    mask: Option<&[f64]>,
    g_out: f64,
    grad: &mut [f64],
    s: &mut Scratch,
) {
    let h = lay.h;
    let w = x.len();
    let h_last = last_hidden(cache, h);
    s.dh.resize(h, 0.0);
    s.dh_next.resize(h, 0.0);
    s.dc.resize(h, 0.0);
    s.dz.resize(4 * h, 0.0);
    s.dc.fill(0.0);
    {
        let v = &p[lay.v()];
        let gv = &mut grad[lay.v()];
        for j in 0..h {
            let m = mask.map_or(1.0, |m| m[j]);
            gv[j] += g_out * m * h_last[j];
            s.dh[j] = g_out * v[j] * m;
        }
    }
    grad[lay.c()] += g_out;

    let (uo, bo) = (lay.u().start, lay.b().start);
    let pu = &p[lay.u()];
    for t in (0..w).rev() {
        let gate = &cache.gates[t * 4 * h..(t + 1) * 4 * h];
        let c_prev = &cache.cs[t * h..(t + 1) * h];
        let h_prev = &cache.hs[t * h..(t + 1) * h];
        let tct = &cache.tc[t * h..(t + 1) * h];
        for j in 0..h {
            let (i, f, o, g) = (gate[j], gate[h + j], gate[2 * h + j], gate[3 * h + j]);
            let dct = s.dc[j] + s.dh[j] * o * (1.0 - tct[j] * tct[j]);
            s.dz[j] = dct * g * i * (1.0 - i);
            s.dz[h + j] = dct * c_prev[j] * f * (1.0 - f);
            s.dz[2 * h + j] = s.dh[j] * tct[j] * o * (1.0 - o);
            s.dz[3 * h + j] = dct * i * (1.0 - g * g);
            s.dc[j] = dct * f;
        }
        s.dh_next.fill(0.0);
        for r in 0..4 * h {
            let dzr = s.dz[r];
            grad[r] += dzr * x[t];
            grad[bo + r] += dzr;
            let gu = &mut grad[uo + r * h..uo + (r + 1) * h];
            let ur = &pu[r * h..(r + 1) * h];
            for j in 0..h {
                gu[j] += dzr * h_prev[j];
                s.dh_next[j] += ur[j] * dzr;
            }
        }
        std::mem::swap(&mut s.dh, &mut s.dh_next);
    }
}

/// Mean squared error of a dropout-free pass and its gradient.
fn loss_and_grad(p: &[f64], lay: Layout, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; p.len()];
    let mut cache = Cache::default();
    let mut scratch = Scratch::default();
    let n = inputs.len() as f64;
    let mut loss = 0.0;
    for (x, &y) in inputs.iter().zip(targets) {
        forward(p, lay, x, &mut cache);
        let err = output(p, lay, last_hidden(&cache, lay.h), None) - y;
        loss += err * err;
        backward(p, lay, x, &cache, None, 2.0 * err / n, &mut grad, &mut scratch);
    }
    (loss / n, grad)
}

fn mse(p: &[f64], lay: Layout, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
    let mut cache = Cache::default();
    let total: f64 = inputs
        .iter()
        .zip(targets)
        .map(|(x, &y)| {
            forward(p, lay, x, &mut cache);
            (output(p, lay, last_hidden(&cache, lay.h), None) - y).powi(2)
        })
        .sum();
    total / inputs.len() as f64
}

fn init_params(lay: Layout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..lay.len()).map(|_| rng.random_range(-0.05..0.05)).collect();
    let b = lay.b();
    p[b.clone()].fill(0.0);
    p[b.start + lay.h..b.start + 2 * lay.h].fill(1.0);
    p[lay.c()] = 0.0;
    p
}

/// `inputs[i] = e[i..i+w]`, `targets[i] = e[i+w]`.
pub fn make_windows(e: &[f64], window: usize) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if window == 0 {
        return Err(Error::InvalidParameter("window must be >= 1".into()));
    }
    if e.len() <= window {
        return Err(Error::InsufficientData { what: "residual windows", needed: window + 1, got: e.len() });
    }
    let inputs = e.windows(window).take(e.len() - window).map(<[f64]>::to_vec).collect();
    Ok((inputs, e[window..].to_vec()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualNet {
    pub schema_version: u32,
    pub config: NetConfig,
    params: Vec<f64>,
    scaler: MinMaxScaler,
    /// Dropout-free training MSE (scaled units) after each epoch.
    loss_trace: Vec<f64>,
}

pub fn train(e: &[f64], cfg: &NetConfig) -> Result<ResidualNet> {
    cfg.validate()?;
    if let Some(i) = e.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let scaler = MinMaxScaler::fit_or_unit(e)?;
    let (inputs, targets) = make_windows(&scaler.transform(e), cfg.window)?;
    let n = inputs.len();
    let batch = if n < 2 * cfg.batch_size {
        warn!("only {n} training windows for batch size {}; using one batch of {n}", cfg.batch_size);
        n
    } else {
        cfg.batch_size
    };

    let lay = Layout { h: cfg.hidden_units };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut p = init_params(lay, &mut rng);
    let (mut m1, mut m2) = (vec![0.0; p.len()], vec![0.0; p.len()]);
    let mut grad = vec![0.0; p.len()];
    let mut order: Vec<usize> = (0..n).collect();
    let mut mask = vec![0.0; lay.h];
    let keep = 1.0 - cfg.dropout_rate;
    let mut cache = Cache::default();
    let mut scratch = Scratch::default();
    let mut step = 0i32;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch) {
            grad.fill(0.0);
            let bn = chunk.len() as f64;
            for &k in chunk {
                let use_mask = cfg.dropout_rate > 0.0;
                if use_mask {
                    for m in mask.iter_mut() {
                        *m = if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 };
                    }
                }
                let mk = use_mask.then_some(mask.as_slice());
                forward(&p, lay, &inputs[k], &mut cache);
                let err = output(&p, lay, last_hidden(&cache, lay.h), mk) - targets[k];
                backward(&p, lay, &inputs[k], &cache, mk, 2.0 * err / bn, &mut grad, &mut scratch);
            }
            step += 1;
            let c1 = 1.0 - cfg.beta1.powi(step);
            let c2 = 1.0 - cfg.beta2.powi(step);
            for i in 0..p.len() {
                m1[i] = cfg.beta1 * m1[i] + (1.0 - cfg.beta1) * grad[i];
                m2[i] = cfg.beta2 * m2[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                p[i] -= cfg.learning_rate * (m1[i] / c1) / ((m2[i] / c2).sqrt() + cfg.epsilon);
            }
        }
        let loss = mse(&p, lay, &inputs, &targets);
        if !loss.is_finite() || p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(epoch + 1));
        }
        trace.push(loss);
    }

    Ok(ResidualNet { schema_version: SCHEMA_VERSION, config: cfg.clone(), params: p, scaler, loss_trace: trace })
}

impl ResidualNet {
    fn layout(&self) -> Layout {
        Layout { h: self.config.hidden_units }
    }

    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn scaler(&self) -> &MinMaxScaler {
        &self.scaler
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn window(&self) -> usize {
        self.config.window
    }

    /// Single dropout-free forward pass in residual units.
    pub fn predict_one(&self, window: &[f64]) -> Result<f64> {
        self.check_window(window)?;
        let x = self.scaler.transform(window);
        Ok(self.scaler.unscale(self.forward_scaled(&x)))
    }

    fn forward_scaled(&self, x: &[f64]) -> f64 {
        let lay = self.layout();
        let mut cache = Cache::default();
        forward(&self.params, lay, x, &mut cache);
        output(&self.params, lay, last_hidden(&cache, lay.h), None)
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.config.window {
            return Err(Error::LengthMismatch { left: window.len(), right: self.config.window });
        }
        Ok(())
    }

    /// Iterated multi-step prediction: each output is appended to the window.
    pub fn predict_residuals(&self, last_window: &[f64], h: usize) -> Result<Vec<f64>> {
        self.check_window(last_window)?;
        if h == 0 {
            return Err(Error::InvalidParameter("forecast horizon must be >= 1".into()));
        }
        let mut buf = self.scaler.transform(last_window);
        let w = buf.len();
        let mut out = Vec::with_capacity(h);
        for _ in 0..h {
            let next = self.forward_scaled(&buf[buf.len() - w..]);
            out.push(self.scaler.unscale(next));
            buf.push(next);
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(s)?;
        if net.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidParameter(format!("unsupported network schema version {}", net.schema_version)));
        }
        if net.params.len() != net.layout().len() || net.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("corrupt network weights".into()));
        }
        Ok(net)
    }
}

pub fn predict_residuals(net: &ResidualNet, last_window: &[f64], h: usize) -> Result<Vec<f64>> {
    net.predict_residuals(last_window, h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_params: usize,
}

/// Relative errors use `max(|a|, |n|, REL_FLOOR)` as the denominator so that
/// gradients which are zero up to rounding do not dominate.
pub const REL_FLOOR: f64 = 1e-6;

/// Compares the analytic MSE gradient with central differences (step 1e-5)
/// for every parameter of a randomly initialised network on random data.
pub fn gradient_check(hidden: usize, window: usize, n_samples: usize, seed: u64) -> GradientCheck {
    let lay = Layout { h: hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p: Vec<f64> = (0..lay.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let inputs: Vec<Vec<f64>> =
        (0..n_samples).map(|_| (0..window).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<f64> = (0..n_samples).map(|_| rng.random_range(-1.0..1.0)).collect();
    compare_gradients(&p, lay, &inputs, &targets)
}

fn compare_gradients(p: &[f64], lay: Layout, inputs: &[Vec<f64>], targets: &[f64]) -> GradientCheck {
    const STEP: f64 = 1e-5;
    let (_, analytic) = loss_and_grad(p, lay, inputs, targets);
    let mut q = p.to_vec();
    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for i in 0..p.len() {
        q[i] = p[i] + STEP;
        let fp = mse(&q, lay, inputs, targets);
        q[i] = p[i] - STEP;
        let fm = mse(&q, lay, inputs, targets);
        q[i] = p[i];
        let numeric = (fp - fm) / (2.0 * STEP);
        let abs = (analytic[i] - numeric).abs();
        max_abs = max_abs.max(abs);
        max_rel = max_rel.max(abs / analytic[i].abs().max(numeric.abs()).max(REL_FLOOR));
    }
    GradientCheck { max_rel_error: max_rel, max_abs_error: max_abs, n_params: p.len() }
}

/// Analytic and central-difference derivative of the MSE with respect to the
/// output bias, on zero inputs and zero targets.
pub fn output_bias_gradient_zero_input(hidden: usize, window: usize, seed: u64) -> (f64, f64) {
    const STEP: f64 = 1e-5;
    let lay = Layout { h: hidden };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p: Vec<f64> = (0..lay.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let inputs = vec![vec![0.0; window]; 4];
    let targets = vec![0.0; 4];
    let (_, g) = loss_and_grad(&p, lay, &inputs, &targets);
    let c = lay.c();
    let orig = p[c];
    p[c] = orig + STEP;
    let fp = mse(&p, lay, &inputs, &targets);
    p[c] = orig - STEP;
    let fm = mse(&p, lay, &inputs, &targets);
    (g[c], (fp - fm) / (2.0 * STEP))
}
