//! Risk-neutral option price under lognormal dispersion of the mean
//! log-volatility, via the M-function, with the Black–Scholes reference and
//! implied-volatility inversion.

use std::f64::consts::{PI, SQRT_2};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{erfc, normal_cdf, GaussLegendre, KahanSum};
use crate::sim::{Coupling, FracVolSimulator, ModelParams};

/// Default Gauss–Legendre order for the M-function.
pub const M_NODES: usize = 512;
const M_TRUNCATION: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionInputs {
    pub spot: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma_t: f64,
    /// Time to maturity `T - t`.
    pub tau: f64,
}

impl OptionInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.strike > 0.0 && self.sigma_t > 0.0 && self.tau > 0.0) {
            return Err(Error::Domain(format!("spot, strike, sigma_t and tau must be positive: {self:?}")));
        }
        if !self.rate.is_finite() {
            return Err(Error::Domain("rate must be finite".into()));
        }
        Ok(())
    }

    /// `(log(S/K)/sqrt(tau) + r sqrt(tau)) / sigma_t`
    pub fn a(&self) -> f64 {
        let st = self.tau.sqrt();
        ((self.spot / self.strike).ln() / st + self.rate * st) / self.sigma_t
    }

    /// `sigma_t sqrt(tau) / 2`
    pub fn b(&self) -> f64 {
        0.5 * self.sigma_t * self.tau.sqrt()
    }

    pub fn with_sigma(&self, sigma_t: f64) -> Self {
        Self { sigma_t, ..*self }
    }

    fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.tau).exp()
    }
}

/// Standard deviation of the mean log-volatility over the option's life.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolDispersion {
    pub alpha: f64,
}

impl VolDispersion {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha >= 0.0 && alpha.is_finite() {
            Ok(Self { alpha })
        } else {
            Err(Error::Domain(format!("alpha = {alpha} must be nonnegative")))
        }
    }

    /// Marginal spread of log-volatility, `k delta^(H-1)`.
    pub fn from_model(model: &ModelParams) -> Self {
        Self { alpha: model.logvol_std() }
    }

    /// Spread of log-volatility averaged over `tau`:
    /// `k delta^(H-1) (tau/delta)^(H-1)` (for `tau >= delta`).
    pub fn averaged(model: &ModelParams, tau: f64) -> Self {
        let blocks = (tau / model.delta).max(1.0);
        Self { alpha: model.logvol_std() * blocks.powf(model.hurst.value() - 1.0) }
    }
}

/// Evaluator for the M-function with a fixed rule.
#[derive(Debug, Clone)]
pub struct MFunction {
    rule: GaussLegendre,
}

impl Default for MFunction {
    fn default() -> Self {
        Self::with_nodes(M_NODES).expect("positive node count")
    }
}

impl MFunction {
    pub fn with_nodes(nodes: usize) -> Result<Self> {
        Ok(Self { rule: GaussLegendre::new(nodes)? })
    }

    /// `M(alpha, a, b)` in its single-integral form, integrated in `u = log x`.
    ///
    /// Where `a x + b/x` changes sign the integrand has a simple pole; the
    /// integral is then taken as a principal value by pairing nodes placed
    /// symmetrically about the pole.
    pub fn eval(&self, alpha: f64, a: f64, b: f64) -> Result<f64> {
        if !(alpha >= 0.0) {
            return Err(Error::Domain(format!("alpha = {alpha} must be nonnegative")));
        }
        if a == 0.0 && b == 0.0 {
            return Err(Error::Singularity("a = b = 0 makes a x + b/x vanish identically".into()));
        }
        if alpha == 0.0 {
            let c = a + b;
            if c == 0.0 {
                return Err(Error::Singularity("alpha = 0 with a + b = 0: the limit Phi(c)/c is unbounded".into()));
            }
            return Ok(normal_cdf(c) / c);
        }
        let g = |u: f64| {
            let c = a * u.exp() + b * (-u).exp();
            (-0.5 * (u / alpha).powi(2) + u).exp() * erfc(-c / SQRT_2) / c
        };
        let (lo, hi) = (-M_TRUNCATION * alpha, M_TRUNCATION * alpha);
        let mut acc = KahanSum::default();
        let pole = if a * b < 0.0 { Some(0.5 * (-b / a).ln()) } else { None };
        match pole {
            Some(p) if p > lo && p < hi => {
                let h = (p - lo).min(hi - p);
                acc.add(self.rule.integrate(0.0, h, |t| g(p + t) + g(p - t)));
                if p - h > lo {
                    acc.add(self.rule.integrate(lo, p - h, g));
                }
                if p + h < hi {
                    acc.add(self.rule.integrate(p + h, hi, g));
                }
            }
            _ => acc.add(self.rule.integrate(lo, hi, g)),
        }
        Ok(acc.total() / (4.0 * alpha) * (2.0 / PI).sqrt())
    }

    /// Option value from the M-function representation.
    pub fn price(&self, opt: &OptionInputs, disp: VolDispersion) -> Result<f64> {
        opt.validate()?;
        let (a, b, al) = (opt.a(), opt.b(), disp.alpha);
        let stock = a * self.eval(al, a, b)? + b * self.eval(al, b, a)?;
        let bond = a * self.eval(al, a, -b)? - b * self.eval(al, -b, a)?;
        Ok(opt.spot * stock - opt.discounted_strike() * bond)
    }
}

pub fn m_function(alpha: f64, a: f64, b: f64) -> Result<f64> {
    MFunction::default().eval(alpha, a, b)
}

pub fn price(opt: &OptionInputs, disp: VolDispersion) -> Result<f64> {
    MFunction::default().price(opt, disp)
}

/// Black–Scholes call, written with `d1 = a + b` and `d2 = a - b`.
pub fn black_scholes(opt: &OptionInputs) -> f64 {
    let (a, b) = (opt.a(), opt.b());
    opt.spot * normal_cdf(a + b) - opt.discounted_strike() * normal_cdf(a - b)
}

/// Black–Scholes put.
pub fn black_scholes_put(opt: &OptionInputs) -> f64 {
    let (a, b) = (opt.a(), opt.b());
    opt.discounted_strike() * normal_cdf(b - a) - opt.spot * normal_cdf(-a - b)
}

const IV_LOW: f64 = 1e-8;
const IV_HIGH: f64 = 5.0;
const IV_PRICE_TOL: f64 = 1e-10;

/// Volatility that reproduces `target` under Black–Scholes, by bisection on
/// `[1e-8, 5]`. `opt.sigma_t` is ignored.
pub fn implied_vol(target: f64, opt: &OptionInputs) -> Result<f64> {
    let probe = opt.with_sigma(1.0);
    probe.validate()?;
    let lower = (opt.spot - opt.discounted_strike()).max(0.0);
    if !(target > lower && target < opt.spot) {
        return Err(Error::NoSolution(format!("price {target} outside the no-arbitrage band ({lower}, {})", opt.spot)));
    }
    let (mut lo, mut hi) = (IV_LOW, IV_HIGH);
    if black_scholes(&opt.with_sigma(hi)) < target {
        return Err(Error::NoSolution(format!("price {target} needs volatility above {IV_HIGH}")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = black_scholes(&opt.with_sigma(mid));
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let sigma = 0.5 * (lo + hi);
    let err = (black_scholes(&opt.with_sigma(sigma)) - target).abs();
    if err > IV_PRICE_TOL && sigma > 2.0 * IV_LOW {
        return Err(Error::NoSolution(format!("bisection stalled with price error {err}")));
    }
    Ok(sigma)
}

/// Moneyness and maturity axes of a smile surface. Prices are per unit strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileGrid {
    pub moneyness: Vec<f64>,
    pub maturities: Vec<f64>,
    pub rate: f64,
}

impl SmileGrid {
    /// `n_m` moneyness points over `[0.5, 1.5]` and `n_t` maturities over `[5, 100]`.
    pub fn default_axes(n_m: usize, n_t: usize, rate: f64) -> Self {
        let lin = |a: f64, b: f64, n: usize| -> Vec<f64> {
            if n == 1 {
                vec![a]
            } else {
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            }
        };
        Self { moneyness: lin(0.5, 1.5, n_m), maturities: lin(5.0, 100.0, n_t), rate }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmilePoint {
    pub moneyness: f64,
    pub tau: f64,
    pub price: f64,
    /// `None` when the price falls outside the range Black–Scholes can reach.
    pub implied_vol: Option<f64>,
    pub delta_vs_bs: f64,
}

/// How the dispersion `alpha` is chosen per maturity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DispersionRule {
    /// `k delta^(H-1)` at every maturity.
    Marginal,
    /// Spread of the log-volatility averaged over each maturity.
    Averaged,
    Fixed(f64),
}

impl DispersionRule {
    pub fn resolve(&self, model: &ModelParams, tau: f64) -> Result<VolDispersion> {
        match *self {
            Self::Marginal => Ok(VolDispersion::from_model(model)),
            Self::Averaged => Ok(VolDispersion::averaged(model, tau)),
            Self::Fixed(a) => VolDispersion::new(a),
        }
    }
}

/// Price, implied volatility and deviation from Black–Scholes over a grid,
/// row-major in maturity then moneyness.
pub fn smile_surface(
    grid: &SmileGrid,
    model: &ModelParams,
    sigma_t: f64,
    rule: DispersionRule,
) -> Result<Vec<SmilePoint>> {
    let m = MFunction::default();
    let cells: Vec<(f64, f64)> =
        grid.maturities.iter().flat_map(|&t| grid.moneyness.iter().map(move |&x| (x, t))).collect();
    cells
        .par_iter()
        .map(|&(moneyness, tau)| {
            let opt = OptionInputs { spot: moneyness, strike: 1.0, rate: grid.rate, sigma_t, tau };
            let price = m.price(&opt, rule.resolve(model, tau)?)?;
            let implied_vol = implied_vol(price, &opt).ok();
            Ok(SmilePoint { moneyness, tau, price, implied_vol, delta_vs_bs: price - black_scholes(&opt) })
        })
        .collect()
}

/// Monte Carlo call price with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McPrice {
    /// Terminal price drawn at the mean volatility `exp(mean log sigma)` of each path.
    pub price: f64,
    pub stderr: f64,
    /// Terminal price of the simulated path itself.
    pub path_price: f64,
    pub path_stderr: f64,
    pub paths: usize,
}

/// Risk-neutral Monte Carlo price. Each path simulates the volatility over
/// `tau / delta` blocks with `mu = r`, `beta = log sigma_t` and independent
/// drivers. Two estimators share the paths: one draws the terminal price at
/// the path's mean log-volatility, the other uses the simulated terminal price.
pub fn monte_carlo_price(opt: &OptionInputs, model: &ModelParams, n_paths: usize, seed: u64) -> Result<McPrice> {
    opt.validate()?;
    if n_paths < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n_paths });
    }
    let ratio = opt.tau / model.delta;
    let n_steps = ratio.round();
    if n_steps < 1.0 || (ratio - n_steps).abs() > 1e-9 * ratio {
        return Err(Error::GridMismatch(format!(
            "tau = {} must be a positive multiple of delta = {}",
            opt.tau, model.delta
        )));
    }
    let n_steps = n_steps as usize;
    let params = ModelParams { mu: opt.rate, beta: opt.sigma_t.ln(), coupling: Coupling::Independent, ..*model };
    let sim = FracVolSimulator::new(&params, n_steps, model.delta)?;
    let dt = model.delta;
    let discount = (-opt.rate * opt.tau).exp();
    let payoffs: Vec<(f64, f64)> = (0..n_paths as u64)
        .into_par_iter()
        .map(|p| {
            let path = sim.path(opt.spot, seed, p)?;
            let mut shock = 0.0;
            let mut mean_lv = 0.0;
            for i in 0..n_steps {
                let sigma = path.logvol[i].exp();
                let ret = (path.prices[i + 1] / path.prices[i]).ln();
                shock += (ret - (opt.rate - 0.5 * sigma * sigma) * dt) / (sigma * dt.sqrt());
                mean_lv += path.logvol[i];
            }
            let sbar = (mean_lv / n_steps as f64).exp();
            let z = shock / (n_steps as f64).sqrt();
            let st = opt.spot * ((opt.rate - 0.5 * sbar * sbar) * opt.tau + sbar * opt.tau.sqrt() * z).exp();
            let mixed = discount * (st - opt.strike).max(0.0);
            let direct = discount * (path.prices[n_steps] - opt.strike).max(0.0);
            Ok((mixed, direct))
        })
        .collect::<Result<_>>()?;
    let stats = |xs: Vec<f64>| {
        let m = crate::numeric::mean(&xs);
        (m, (crate::numeric::variance(&xs) / xs.len() as f64).sqrt())
    };
    let (mixed, direct): (Vec<f64>, Vec<f64>) = payoffs.into_iter().unzip();
    let (price, stderr) = stats(mixed);
    let (path_price, path_stderr) = stats(direct);
    Ok(McPrice { price, stderr, path_price, path_stderr, paths: n_paths })
}
