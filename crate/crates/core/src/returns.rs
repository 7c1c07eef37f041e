//! Return law of the fractional volatility model.
//!
//! Log-volatility is Gaussian at a fixed time, so the return over a lag
//! `lag` is a lognormal-weighted mixture of Gaussians. The density and the
//! distribution function are computed by Gauss–Legendre quadrature over
//! `u = log sigma`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fgn::HurstExponent;
use crate::numeric::{normal_cdf, GaussLegendre, KahanSum};
use crate::rng::{self, lane};

/// Default number of quadrature nodes per panel.
pub const DEFAULT_NODES: usize = 256;
/// Half-width of the central quadrature panel, in standard deviations of log-volatility.
pub const TRUNCATION_SDS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReturnDistParams {
    pub beta: f64,
    pub k: f64,
    pub delta: f64,
    pub hurst: HurstExponent,
    pub mu: f64,
    /// Return horizon `T - t`.
    pub lag: f64,
}

impl ReturnDistParams {
    pub fn new(beta: f64, k: f64, delta: f64, hurst: f64, mu: f64, lag: f64) -> Result<Self> {
        let p = Self { beta, k, delta, hurst: HurstExponent::new(hurst)?, mu, lag };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k >= 0.0) || !(self.delta > 0.0) || !(self.lag > 0.0) {
            return Err(Error::Domain(format!(
                "need k >= 0, delta > 0, lag > 0 (got k = {}, delta = {}, lag = {})",
                self.k, self.delta, self.lag
            )));
        }
        if !self.beta.is_finite() || !self.mu.is_finite() {
            return Err(Error::Domain("beta and mu must be finite".into()));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.beta.exp()
    }

    pub fn sigma_logvol(&self) -> f64 {
        self.k * self.delta.powf(self.hurst.value() - 1.0)
    }

    /// Tail constant `8 k^2 delta^(2H - 2)`.
    pub fn tail_c(&self) -> f64 {
        8.0 * self.sigma_logvol().powi(2)
    }

    /// Centre of the return law at the central volatility `theta`.
    pub fn r0(&self) -> f64 {
        (self.mu - 0.5 * self.theta().powi(2)) * self.lag
    }

    /// `(r - r0)^2 / (2 lag theta^2)`.
    pub fn lambda(&self, r: f64) -> f64 {
        let d = r - self.r0();
        d * d / (2.0 * self.lag * self.theta().powi(2))
    }
}

/// Quadrature evaluator for one parameter set.
#[derive(Debug, Clone)]
pub struct ReturnDist {
    params: ReturnDistParams,
    rule: GaussLegendre,
}

impl ReturnDist {
    pub fn new(params: ReturnDistParams) -> Result<Self> {
        Self::with_nodes(params, DEFAULT_NODES)
    }

    pub fn with_nodes(params: ReturnDistParams, nodes: usize) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, rule: GaussLegendre::new(nodes)? })
    }

    pub fn params(&self) -> &ReturnDistParams {
        &self.params
    }

    fn cond_mean(&self, u: f64) -> f64 {
        (self.params.mu - 0.5 * (2.0 * u).exp()) * self.params.lag
    }

    fn cond_sd(&self, u: f64) -> f64 {
        u.exp() * self.params.lag.sqrt()
    }

    fn mixing_density(&self, u: f64) -> f64 {
        let s = self.params.sigma_logvol();
        let z = (u - self.params.beta) / s;
        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * s)
    }

    /// Panels in `u` covering the bulk of the mixing law and, for returns far
    /// in the tail, the region where the integrand actually peaks.
    fn panels(&self, r: f64) -> Vec<(f64, f64)> {
        let p = &self.params;
        let s = p.sigma_logvol();
        let (lo, hi) = (p.beta - TRUNCATION_SDS * s, p.beta + TRUNCATION_SDS * s);
        let q = {
            let d = r - p.r0();
            d * d / (2.0 * p.lag)
        };
        // maximiser of -(u-beta)^2/(2 s^2) - u - q e^{-2u}
        let grad = |u: f64| -(u - p.beta) / (s * s) - 1.0 + 2.0 * q * (-2.0 * u).exp();
        let (mut a, mut b) = (p.beta - 40.0 * s - 40.0, p.beta + 40.0 * s + 40.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if grad(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let peak = 0.5 * (a + b);
        let curv = 1.0 / (s * s) + 4.0 * q * (-2.0 * peak).exp();
        let w = 12.0 / curv.sqrt();
        let (plo, phi) = (peak - w, peak + w);
        if plo >= hi {
            vec![(lo, hi), (hi, plo), (plo, phi)]
        } else if phi <= lo {
            vec![(plo, phi), (phi, lo), (lo, hi)]
        } else {
            vec![(lo.min(plo), hi.max(phi))]
        }
    }

    fn integrate_u<F: Fn(f64) -> f64>(&self, r: f64, f: F) -> f64 {
        let mut acc = KahanSum::default();
        for (a, b) in self.panels(r) {
            if b > a {
                acc.add(self.rule.integrate(a, b, &f));
            }
        }
        acc.total()
    }

    /// Density of the return over `lag`.
    pub fn pdf(&self, r: f64) -> f64 {
        let p = &self.params;
        if p.k == 0.0 {
            let sd = p.theta() * p.lag.sqrt();
            let z = (r - p.r0()) / sd;
            return (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sd);
        }
        self.integrate_u(r, |u| {
            let sd = self.cond_sd(u);
            let z = (r - self.cond_mean(u)) / sd;
            self.mixing_density(u) * (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * sd)
        })
    }

    pub fn cdf(&self, r: f64) -> f64 {
        let p = &self.params;
        if p.k == 0.0 {
            let sd = p.theta() * p.lag.sqrt();
            return normal_cdf((r - p.r0()) / sd);
        }
        // fixed nodes keep the result monotone in r
        let s = p.sigma_logvol();
        let v = self.rule.integrate(p.beta - TRUNCATION_SDS * s, p.beta + TRUNCATION_SDS * s, |u| {
            self.mixing_density(u) * normal_cdf((r - self.cond_mean(u)) / self.cond_sd(u))
        });
        v.clamp(0.0, 1.0)
    }

    /// Smallest `r` with `cdf(r) >= prob`, by bisection.
    pub fn quantile(&self, prob: f64) -> f64 {
        let p = &self.params;
        let scale = p.theta() * p.lag.sqrt() * (TRUNCATION_SDS * p.sigma_logvol()).exp();
        let (mut a, mut b) = (p.r0() - 50.0 * scale, p.r0() + 50.0 * scale);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if self.cdf(m) < prob {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Mean and variance of the return, by quadrature over the mixing law.
    pub fn moments(&self) -> (f64, f64) {
        let p = &self.params;
        if p.k == 0.0 {
            let sd = p.theta() * p.lag.sqrt();
            return (p.r0(), sd * sd);
        }
        let m1 = self.integrate_u(p.r0(), |u| self.mixing_density(u) * self.cond_mean(u));
        let m2 = self.integrate_u(p.r0(), |u| {
            let m = self.cond_mean(u);
            let s = self.cond_sd(u);
            self.mixing_density(u) * (m * m + s * s)
        });
        (m1, m2 - m1 * m1)
    }

    /// Asymptotic tail `prefactor * (lag * lambda)^(-1/2) * exp(-log^2(lambda) / C)`.
    pub fn tail_asymptotic(&self, r: f64, prefactor: f64) -> Result<f64> {
        tail_asymptotic(r, &self.params, prefactor)
    }

    /// The single constant that best matches the tail law to the density
    /// (geometric mean of their ratio over the given returns).
    pub fn fit_tail_prefactor(&self, returns: &[f64]) -> Result<f64> {
        let mut acc = KahanSum::default();
        for &r in returns {
            let t = tail_asymptotic(r, &self.params, 1.0)?;
            acc.add((self.pdf(r) / t).ln());
        }
        Ok((acc.total() / returns.len() as f64).exp())
    }
}

/// Large-return asymptotic form of the density. `lambda` must exceed 1.
pub fn tail_asymptotic(r: f64, params: &ReturnDistParams, prefactor: f64) -> Result<f64> {
    let lambda = params.lambda(r);
    if !(lambda > 1.0) {
        return Err(Error::OutOfRegime(lambda));
    }
    let c = params.tail_c();
    let l = lambda.ln();
    Ok(prefactor * (params.lag * lambda).powf(-0.5) * (-l * l / c).exp())
}

/// `n` returns drawn from the mixture, from stream `path` of `seed`.
pub fn sample_returns(params: &ReturnDistParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::EmptyRequest("sample size must be at least 1"));
    }
    let mut rng = rng::substream(seed, 0, lane::MIXTURE);
    let s = params.sigma_logvol();
    let lag = params.lag;
    Ok((0..n)
        .map(|_| {
            let u = params.beta + s * rng::normal(&mut rng);
            let sigma = u.exp();
            let z = rng::normal(&mut rng);
            (params.mu - 0.5 * sigma * sigma) * lag + sigma * lag.sqrt() * z
        })
        .collect())
}
