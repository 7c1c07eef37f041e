//! Price and volatility paths of the fractional volatility model.
//!
//! Two constructions are provided. [`simulate_path`] drives log-volatility with
//! fractional Gaussian noise observed at scale `delta`. [`simulate_identified`]
//! uses the moving-average representation, a power-law kernel applied to
//! Brownian increments, which lets the price and the volatility share a driver.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::{FgnGenerator, HurstExponent};
use crate::rng::{self, lane};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    #[default]
    #[serde(rename = "independent_drivers")]
    Independent,
    #[serde(rename = "identified_drivers")]
    Identified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Drift per unit time.
    pub mu: f64,
    /// Mean log-volatility.
    pub beta: f64,
    /// Volatility intensity.
    pub k: f64,
    /// Observation time scale.
    pub delta: f64,
    pub hurst: HurstExponent,
    pub coupling: Coupling,
    /// Kernel amplitude of the moving-average form. Signed: with identified
    /// drivers a negative amplitude makes falling prices raise volatility.
    pub kprime: f64,
}

impl ModelParams {
    pub fn new(mu: f64, beta: f64, k: f64, delta: f64, hurst: f64) -> Result<Self> {
        let p = Self {
            mu,
            beta,
            k,
            delta,
            hurst: HurstExponent::new(hurst)?,
            coupling: Coupling::Independent,
            kprime: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Domain(format!("delta = {} must be positive", self.delta)));
        }
        if !(self.k >= 0.0 && self.k.is_finite()) {
            return Err(Error::Domain(format!("k = {} must be nonnegative", self.k)));
        }
        if !self.kprime.is_finite() || !self.mu.is_finite() || !self.beta.is_finite() {
            return Err(Error::Domain("mu, beta and kprime must be finite".into()));
        }
        Ok(())
    }

    /// Standard deviation of log-volatility, `k * delta^(H-1)`.
    pub fn logvol_std(&self) -> f64 {
        self.k * self.delta.powf(self.hurst.value() - 1.0)
    }
}

/// Mean and variance of log-volatility at a fixed time.
pub fn logvol_marginal_moments(params: &ModelParams) -> (f64, f64) {
    let s = params.logvol_std();
    (params.beta, s * s)
}

/// A price series with aligned log-volatility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketPath {
    pub times: Vec<f64>,
    pub prices: Vec<f64>,
    pub logvol: Vec<f64>,
    pub seed: u64,
}

impl MarketPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn log_prices(&self) -> Vec<f64> {
        self.prices.iter().map(|p| p.ln()).collect()
    }

    /// One-step log returns.
    pub fn log_returns(&self) -> Vec<f64> {
        self.prices.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
    }

    pub fn check(&self) -> Result<()> {
        let n = self.times.len();
        if self.prices.len() != n || self.logvol.len() != n {
            return Err(Error::Domain("times, prices and logvol must have equal length".into()));
        }
        if let Some(i) = self.prices.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Domain(format!("price {} at index {i} is not positive", self.prices[i])));
        }
        if let Some(i) = self.times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!("times not strictly increasing at index {}", i + 1)));
        }
        Ok(())
    }
}

fn check_common(n_steps: usize, dt: f64, s0: f64) -> Result<()> {
    if n_steps == 0 {
        return Err(Error::EmptyRequest("n_steps must be at least 1"));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::Domain(format!("s0 = {s0} must be positive")));
    }
    Ok(())
}

/// Simulate the fractional-noise form on a grid of `n_steps` steps of `dt`.
pub fn simulate_path(params: &ModelParams, n_steps: usize, dt: f64, s0: f64, seed: u64) -> Result<MarketPath> {
    FracVolSimulator::new(params, n_steps, dt)?.path(s0, seed, 0)
}

/// Reusable simulator for ensembles of the fractional-noise form.
#[derive(Debug)]
pub struct FracVolSimulator {
    params: ModelParams,
    n_steps: usize,
    dt: f64,
    /// Volatility blocks per price step (dt >= delta), or 0 when dt < delta.
    blocks_per_step: usize,
    generator: Option<FgnGenerator>,
    n_blocks: usize,
}

impl FracVolSimulator {
    pub fn new(params: &ModelParams, n_steps: usize, dt: f64) -> Result<Self> {
        params.validate()?;
        check_common(n_steps, dt, 1.0)?;
        if params.coupling == Coupling::Identified {
            return Err(Error::Config("identified drivers need the moving-average form (simulate_identified)".into()));
        }
        let delta = params.delta;
        let (blocks_per_step, n_blocks) = if dt <= delta * (1.0 + 1e-12) {
            (0, block_index(n_steps as f64 * dt, delta) + 1)
        } else {
            let ratio = dt / delta;
            let m = ratio.round();
            if (ratio - m).abs() > 1e-9 * ratio {
                return Err(Error::GridMismatch(format!("dt = {dt} exceeds delta = {delta} without an integer ratio")));
            }
            let m = m as usize;
            (m, n_steps * m + 1)
        };
        let generator = if params.k > 0.0 { Some(FgnGenerator::new(n_blocks, params.hurst, delta)?) } else { None };
        Ok(Self { params: *params, n_steps, dt, blocks_per_step, generator, n_blocks })
    }

    /// Log-volatility per observation block.
    fn block_logvol(&self, seed: u64, path: u64) -> Vec<f64> {
        let beta = self.params.beta;
        match &self.generator {
            None => vec![beta; self.n_blocks],
            Some(g) => {
                let mut rng = rng::substream(seed, path, lane::VOLATILITY);
                let scale = self.params.k / self.params.delta;
                g.sample(&mut rng).into_iter().map(|x| beta + scale * x).collect()
            }
        }
    }

    /// Path number `path` of the ensemble identified by `seed`.
    pub fn path(&self, s0: f64, seed: u64, path: u64) -> Result<MarketPath> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Domain(format!("s0 = {s0} must be positive")));
        }
        let blocks = self.block_logvol(seed, path);
        let mut price_rng = rng::substream(seed, path, lane::PRICE);
        let n = self.n_steps;
        let dt = self.dt;
        let delta = self.params.delta;
        let mu = self.params.mu;
        let mut times = Vec::with_capacity(n + 1);
        let mut prices = Vec::with_capacity(n + 1);
        let mut logvol = Vec::with_capacity(n + 1);
        let mut log_s = s0.ln();
        for i in 0..=n {
            let t = i as f64 * dt;
            let lv = if self.blocks_per_step == 0 {
                blocks[block_index(t, delta)]
            } else {
                blocks[i * self.blocks_per_step]
            };
            times.push(t);
            prices.push(log_s.exp());
            logvol.push(lv);
            if i == n {
                break;
            }
            let var = if self.blocks_per_step == 0 {
                (2.0 * lv).exp() * dt
            } else {
                let start = i * self.blocks_per_step;
                blocks[start..start + self.blocks_per_step].iter().map(|&b| (2.0 * b).exp() * delta).sum()
            };
            let z = rng::normal(&mut price_rng);
            log_s += mu * dt - 0.5 * var + var.sqrt() * z;
        }
        Ok(MarketPath { times, prices, logvol, seed })
    }
}

fn block_index(t: f64, delta: f64) -> usize {
    // tolerate rounding in i * dt landing just below a block boundary
    ((t / delta) * (1.0 + 1e-12)).floor() as usize
}

/// Kernel amplitude that gives the truncated moving-average form the same
/// stationary log-volatility variance as the fractional-noise form.
pub fn calibrate_kprime(params: &ModelParams, dt: f64, history: usize) -> f64 {
    let w = kernel_weights(params.hurst, dt, history);
    let var_unit: f64 = w.iter().map(|x| x * x * dt).sum();
    params.logvol_std() / var_unit.sqrt()
}

/// `w[m] = (m dt)^(H - 3/2)` for lags `m = 1..=history`, with `w[0] = 0`.
fn kernel_weights(hurst: HurstExponent, dt: f64, history: usize) -> Vec<f64> {
    let e = hurst.value() - 1.5;
    let mut w = vec![0.0; history + 1];
    for (m, x) in w.iter_mut().enumerate().skip(1) {
        *x = (m as f64 * dt).powf(e);
    }
    w
}

/// Default kernel window for [`simulate_identified`].
pub const DEFAULT_HISTORY: usize = 4096;

/// Simulate the moving-average form. The first `history` increments are
/// burn-in used only to fill the kernel window.
pub fn simulate_identified(
    params: &ModelParams,
    n_steps: usize,
    dt: f64,
    s0: f64,
    history: usize,
    seed: u64,
) -> Result<MarketPath> {
    IdentifiedSimulator::new(params, n_steps, dt, history)?.path(s0, seed, 0)
}

/// Reusable simulator for ensembles of the moving-average form.
pub struct IdentifiedSimulator {
    params: ModelParams,
    n_steps: usize,
    dt: f64,
    history: usize,
    kernel_fft: Vec<Complex64>,
    fft_len: usize,
}

impl std::fmt::Debug for IdentifiedSimulator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IdentifiedSimulator")
            .field("params", &self.params)
            .field("n_steps", &self.n_steps)
            .field("dt", &self.dt)
            .field("history", &self.history)
            .finish()
    }
}

impl IdentifiedSimulator {
    pub fn new(params: &ModelParams, n_steps: usize, dt: f64, history: usize) -> Result<Self> {
        params.validate()?;
        check_common(n_steps, dt, 1.0)?;
        if history == 0 {
            return Err(Error::Domain("history must be at least 1".into()));
        }
        let total = history + n_steps;
        let fft_len = (total + history + 1).next_power_of_two();
        let mut kernel: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); fft_len];
        for (m, w) in kernel_weights(params.hurst, dt, history).into_iter().enumerate() {
            kernel[m] = Complex64::new(params.kprime * w, 0.0);
        }
        FftPlanner::new().plan_fft_forward(fft_len).process(&mut kernel);
        Ok(Self { params: *params, n_steps, dt, history, kernel_fft: kernel, fft_len })
    }

    pub fn path(&self, s0: f64, seed: u64, path: u64) -> Result<MarketPath> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::Domain(format!("s0 = {s0} must be positive")));
        }
        let n = self.n_steps;
        let dt = self.dt;
        let sqdt = dt.sqrt();
        let total = self.history + n;
        let mut vol_rng = rng::substream(seed, path, lane::VOLATILITY);
        let mut db = vec![0.0; total];
        rng::fill_normal(&mut vol_rng, &mut db);
        for x in &mut db {
            *x *= sqdt;
        }
        // y[g] = sum_{m>=1} kprime * w[m] * db[g - m]
        let mut buf: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, &x) in buf.iter_mut().zip(&db) {
            b.re = x;
        }
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(self.fft_len).process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= k;
        }
        planner.plan_fft_inverse(self.fft_len).process(&mut buf);
        let norm = 1.0 / self.fft_len as f64;

        let mut price_rng = rng::substream(seed, path, lane::PRICE);
        let mu = self.params.mu;
        let beta = self.params.beta;
        let mut times = Vec::with_capacity(n + 1);
        let mut prices = Vec::with_capacity(n + 1);
        let mut logvol = Vec::with_capacity(n + 1);
        let mut log_s = s0.ln();
        for i in 0..=n {
            let g = self.history + i;
            let lv = beta + buf[g].re * norm;
            times.push(i as f64 * dt);
            prices.push(log_s.exp());
            logvol.push(lv);
            if i == n {
                break;
            }
            let shock = match self.params.coupling {
                Coupling::Identified => db[g],
                Coupling::Independent => sqdt * rng::normal(&mut price_rng),
            };
            let sigma = lv.exp();
            log_s += (mu - 0.5 * sigma * sigma) * dt + sigma * shock;
        }
        Ok(MarketPath { times, prices, logvol, seed })
    }
}
