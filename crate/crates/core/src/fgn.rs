//! Exact-covariance fractional Gaussian noise and fractional Brownian motion.
//!
//! The default generator is circulant embedding (Davies–Harte). When the
//! embedding has a negative eigenvalue the generator falls back to the
//! Durbin–Levinson recursion, which is exact for every Hurst exponent but
//! quadratic in the series length.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, lane, Rng};

/// Hurst exponent, `0 < H <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstExponent(f64);

impl HurstExponent {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value <= 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("Hurst exponent {value} not in (0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for HurstExponent {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<HurstExponent> for f64 {
    fn from(h: HurstExponent) -> f64 {
        h.0
    }
}

/// Samples of fractional Gaussian noise at a fixed spacing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FgnSeries {
    pub values: Vec<f64>,
    pub spacing: f64,
    pub hurst: HurstExponent,
    pub seed: u64,
}

/// A fractional Brownian motion path sampled at `values.len()` grid points.
///
/// `values[i]` is the sum of the first `i` noise increments, so the path has
/// the same length as its noise and `values[0] == 0`. The sum of all
/// increments, one step past the last grid point, is kept in `terminal`.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmSeries {
    pub values: Vec<f64>,
    pub terminal: f64,
    pub spacing: f64,
    pub hurst: HurstExponent,
}

impl FbmSeries {
    /// The increments this path was built from.
    pub fn increments(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(&last) = self.values.last() {
            out.push(self.terminal - last);
        }
        out
    }
}

/// `Cov(B_H(s), B_H(t))` for standard fractional Brownian motion.
pub fn fbm_covariance(s: f64, t: f64, hurst: HurstExponent) -> f64 {
    let h2 = 2.0 * hurst.value();
    0.5 * (t.abs().powf(h2) + s.abs().powf(h2) - (t - s).abs().powf(h2))
}

/// Autocovariance of fGn increments taken at `spacing`.
pub fn fgn_autocovariance(lag: usize, hurst: HurstExponent, spacing: f64) -> f64 {
    let h2 = 2.0 * hurst.value();
    let k = lag as f64;
    let core = if lag == 0 { 1.0 } else { 0.5 * ((k + 1.0).powf(h2) - 2.0 * k.powf(h2) + (k - 1.0).powf(h2)) };
    spacing.powf(h2) * core
}

/// Which exact algorithm produced (or should produce) a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FgnMethod {
    /// Circulant embedding, falling back to Durbin–Levinson if needed.
    Auto,
    CirculantEmbedding,
    DurbinLevinson,
}

enum Engine {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Levinson {
        acov: Vec<f64>,
    },
    /// H = 1: every increment equals the same Gaussian draw.
    Degenerate,
}

/// Precomputed generator for repeated draws of length-`n` fGn.
pub struct FgnGenerator {
    n: usize,
    hurst: HurstExponent,
    spacing: f64,
    engine: Engine,
}

impl std::fmt::Debug for FgnGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FgnGenerator")
            .field("n", &self.n)
            .field("hurst", &self.hurst)
            .field("spacing", &self.spacing)
            .field("method", &self.method())
            .finish()
    }
}

impl FgnGenerator {
    pub fn new(n: usize, hurst: HurstExponent, spacing: f64) -> Result<Self> {
        Self::with_method(n, hurst, spacing, FgnMethod::Auto)
    }

    pub fn with_method(n: usize, hurst: HurstExponent, spacing: f64, method: FgnMethod) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyRequest("fGn length must be at least 1"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Domain(format!("spacing {spacing} must be positive")));
        }
        let engine = if hurst.value() == 1.0 {
            Engine::Degenerate
        } else {
            match method {
                FgnMethod::DurbinLevinson => levinson_engine(n, hurst)?,
                FgnMethod::CirculantEmbedding => circulant_engine(n, hurst)?,
                FgnMethod::Auto => match circulant_engine(n, hurst) {
                    Ok(e) => e,
                    Err(_) => levinson_engine(n, hurst)?,
                },
            }
        };
        Ok(Self { n, hurst, spacing, engine })
    }

    pub fn method(&self) -> FgnMethod {
        match self.engine {
            Engine::Circulant { .. } => FgnMethod::CirculantEmbedding,
            Engine::Levinson { .. } | Engine::Degenerate => FgnMethod::DurbinLevinson,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Draw one series from `rng`.
    pub fn sample(&self, rng: &mut Rng) -> Vec<f64> {
        let scale = self.spacing.powf(self.hurst.value());
        let mut out = match &self.engine {
            Engine::Degenerate => vec![rng::normal(rng); self.n],
            Engine::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|&s| {
                        let re = rng::normal(rng);
                        let im = rng::normal(rng);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf[..self.n].iter().map(|c| c.re).collect()
            }
            Engine::Levinson { acov } => durbin_levinson_sample(acov, rng),
        };
        for v in &mut out {
            *v *= scale;
        }
        out
    }
}

fn circulant_engine(n: usize, hurst: HurstExponent) -> Result<Engine> {
    let half = n.next_power_of_two().max(2);
    let m = 2 * half;
    let mut row: Vec<Complex64> = Vec::with_capacity(m);
    for k in 0..=half {
        row.push(Complex64::new(fgn_autocovariance(k, hurst, 1.0), 0.0));
    }
    for k in (1..half).rev() {
        row.push(Complex64::new(fgn_autocovariance(k, hurst, 1.0), 0.0));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    fft.process(&mut row);
    let max = row.iter().map(|c| c.re).fold(0.0_f64, f64::max);
    // rounding noise in the transform of a nonnegative spectrum is of order eps * max
    let tol = 1e-12 * max;
    let mut sqrt_eig = Vec::with_capacity(m);
    for (j, c) in row.iter().enumerate() {
        if c.re < -tol {
            return Err(Error::Generation {
                method: "circulant embedding",
                reason: format!("negative eigenvalue {} at frequency {j}", c.re),
            });
        }
        sqrt_eig.push((c.re.max(0.0) / m as f64).sqrt());
    }
    Ok(Engine::Circulant { sqrt_eig, fft })
}

fn levinson_engine(n: usize, hurst: HurstExponent) -> Result<Engine> {
    let acov: Vec<f64> = (0..n).map(|k| fgn_autocovariance(k, hurst, 1.0)).collect();
    Ok(Engine::Levinson { acov })
}

/// Sequential conditional-Gaussian sampling using the Durbin–Levinson
/// recursion for the one-step predictor.
fn durbin_levinson_sample(acov: &[f64], rng: &mut Rng) -> Vec<f64> {
    let n = acov.len();
    let mut x = Vec::with_capacity(n);
    let mut phi = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut v = acov[0];
    x.push(v.sqrt() * rng::normal(rng));
    for t in 1..n {
        // update predictor coefficients phi_{t,1..t}
        let mut num = acov[t];
        for j in 1..t {
            num -= prev[j] * acov[t - j];
        }
        let refl = num / v;
        phi[t] = refl;
        for j in 1..t {
            phi[j] = prev[j] - refl * prev[t - j];
        }
        v *= 1.0 - refl * refl;
        let mut mean = 0.0;
        for j in 1..=t {
            mean += phi[j] * x[t - j];
        }
        x.push(mean + v.max(0.0).sqrt() * rng::normal(rng));
        prev[1..=t].copy_from_slice(&phi[1..=t]);
    }
    x
}

/// `n` samples of fGn with increments at `spacing`, drawn from the seed's
/// primary stream.
pub fn generate_fgn(n: usize, hurst: HurstExponent, spacing: f64, seed: u64) -> Result<FgnSeries> {
    let gen = FgnGenerator::new(n, hurst, spacing)?;
    let mut rng = rng::substream(seed, 0, lane::VOLATILITY);
    Ok(FgnSeries { values: gen.sample(&mut rng), spacing, hurst, seed })
}

/// Prefix sums of the noise, starting at the origin.
pub fn fbm_from_fgn(noise: &FgnSeries) -> FbmSeries {
    let mut values = Vec::with_capacity(noise.values.len());
    let mut acc = 0.0;
    for &dx in &noise.values {
        values.push(acc);
        acc += dx;
    }
    FbmSeries { values, terminal: acc, spacing: noise.spacing, hurst: noise.hurst }
}
