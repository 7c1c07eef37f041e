//! Volatility statistics reconstructed from a price series: induced
//! volatility, the integrated log-volatility decomposition, the scaling
//! exponent of its residual, leverage and linear autocorrelation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{linear_fit, mean, KahanSum};

/// How the windowed variance of log-price is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VarianceEstimator {
    /// Sum of squared log-price changes inside the window.
    #[default]
    Realized,
    /// Sample variance of the log-price levels inside the window.
    Levels,
    /// Variance of the levels around their least-squares line.
    DetrendedLevels,
}

/// Sliding-window induced volatility.
///
/// Window `j` spans the log-prices `j..=j + window` (that is, `window`
/// steps of length `dt`); the result has `len - window` entries, entry `j`
/// belonging to the window centre `j + window / 2`.
pub fn induced_volatility(
    log_prices: &[f64],
    window: usize,
    dt: f64,
    estimator: VarianceEstimator,
) -> Result<Vec<f64>> {
    if window < 8 {
        return Err(Error::Config(format!("window = {window} must be at least 8 samples")));
    }
    if log_prices.len() <= window {
        return Err(Error::InsufficientData { needed: window + 1, got: log_prices.len() });
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("dt = {dt} must be positive")));
    }
    let span = window as f64 * dt;
    let out = (0..log_prices.len() - window)
        .map(|j| {
            let w = &log_prices[j..=j + window];
            let var = match estimator {
                VarianceEstimator::Realized => {
                    let mut s = KahanSum::default();
                    for p in w.windows(2) {
                        let d = p[1] - p[0];
                        s.add(d * d);
                    }
                    s.total()
                }
                VarianceEstimator::Levels => population_variance(w),
                VarianceEstimator::DetrendedLevels => {
                    let x: Vec<f64> = (0..w.len()).map(|i| i as f64).collect();
                    let fit = linear_fit(&x, w);
                    let r: Vec<f64> = w.iter().zip(&x).map(|(y, x)| y - fit.intercept - fit.slope * x).collect();
                    population_variance(&r)
                }
            };
            (var / span).sqrt()
        })
        .collect();
    Ok(out)
}

fn population_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut s = KahanSum::default();
    for &x in xs {
        s.add((x - m) * (x - m));
    }
    s.total() / xs.len() as f64
}

/// Result of splitting the cumulative log-volatility into a line and a residual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// Slope per observation step.
    pub beta_hat: f64,
    pub intercept: f64,
    pub r_sigma: Vec<f64>,
}

/// Cumulative sums of `log vol` at steps `n = 0, 1, ...` fitted by
/// `intercept + beta_hat * n`; the residual is `R_sigma`.
///
/// `delta` is the physical spacing of the samples and only enters through
/// validation: the slope is reported per observation step.
pub fn integrated_logvol_decompose(vol: &[f64], delta: f64) -> Result<Decomposition> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be positive")));
    }
    if vol.len() < 3 {
        return Err(Error::InsufficientData { needed: 3, got: vol.len() });
    }
    let mut cum = Vec::with_capacity(vol.len());
    let mut acc = KahanSum::default();
    for (index, &v) in vol.iter().enumerate() {
        if !(v > 0.0) {
            return Err(Error::NonPositiveVolatility { index, value: v });
        }
        acc.add(v.ln());
        cum.push(acc.total());
    }
    let t: Vec<f64> = (0..cum.len()).map(|n| n as f64).collect();
    let fit = linear_fit(&t, &cum);
    let r_sigma = cum.iter().zip(&t).map(|(c, t)| c - fit.intercept - fit.slope * t).collect();
    Ok(Decomposition { beta_hat: fit.slope, intercept: fit.intercept, r_sigma })
}

/// Powers of two from 1 up to `len / 64`.
pub fn default_lags(len: usize) -> Vec<usize> {
    let top = (len / 64).max(1);
    std::iter::successors(Some(1usize), |l| Some(l * 2)).take_while(|&l| l <= top).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub hurst_hat: f64,
    pub stderr: f64,
    /// `(lag, mean |R(t + lag) - R(t)|)` pairs that entered the fit.
    pub points: Vec<(usize, f64)>,
}

/// Slope of `log E|R(t + lag) - R(t)|` against `log lag`.
pub fn scaling_exponent(r_sigma: &[f64], lags: &[usize]) -> Result<ScalingFit> {
    let mut used: Vec<usize> = lags.iter().copied().filter(|&l| l > 0 && l < r_sigma.len()).collect();
    used.sort_unstable();
    used.dedup();
    let points: Vec<(usize, f64)> = used
        .into_iter()
        .map(|lag| {
            let mut s = KahanSum::default();
            for i in 0..r_sigma.len() - lag {
                s.add((r_sigma[i + lag] - r_sigma[i]).abs());
            }
            (lag, s.total() / (r_sigma.len() - lag) as f64)
        })
        .filter(|&(_, m)| m > 0.0 && m.is_finite())
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: points.len() });
    }
    let x: Vec<f64> = points.iter().map(|&(l, _)| (l as f64).ln()).collect();
    let y: Vec<f64> = points.iter().map(|&(_, m)| m.ln()).collect();
    let fit = linear_fit(&x, &y);
    Ok(ScalingFit { hurst_hat: fit.slope, stderr: fit.slope_stderr, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeveragePoint {
    pub lag: i64,
    pub value: f64,
    /// Standard error from the spread of independent estimates (paths, or
    /// contiguous blocks of a single series).
    pub stderr: f64,
}

/// Number of contiguous blocks a single series is cut into for error bars.
const LEVERAGE_BLOCKS: usize = 16;

/// `L(tau) = <r(t+tau)^2 r(t)> - <r(t+tau)^2><r(t)>` for `tau` in
/// `-max_lag..=max_lag`, averaged over time and over the given paths, with
/// the means taken over the whole ensemble.
/// With `normalized`, each value is divided by `<r^2>^2`.
pub fn leverage(paths: &[&[f64]], max_lag: usize, normalized: bool) -> Result<Vec<LeveragePoint>> {
    if paths.is_empty() {
        return Err(Error::EmptyRequest("leverage needs at least one series"));
    }
    let shortest = paths.iter().map(|p| p.len()).min().unwrap_or(0);
    if shortest <= 2 * max_lag {
        return Err(Error::InsufficientData { needed: 2 * max_lag + 1, got: shortest });
    }
    let units: Vec<&[f64]> = if paths.len() >= 2 {
        paths.to_vec()
    } else {
        let p = paths[0];
        let size = p.len() / LEVERAGE_BLOCKS;
        if size > 2 * max_lag {
            p.chunks_exact(size).collect()
        } else {
            vec![p]
        }
    };
    let lags: Vec<i64> = (-(max_lag as i64)..=max_lag as i64).collect();
    let scale = if normalized {
        let mut m2 = KahanSum::default();
        let mut count = 0usize;
        for u in &units {
            for r in u.iter() {
                m2.add(r * r);
            }
            count += u.len();
        }
        let m2 = m2.total() / count as f64;
        1.0 / (m2 * m2)
    } else {
        1.0
    };
    Ok(lags
        .iter()
        .map(|&tau| {
            let sums: Vec<LagSums> = units.iter().map(|u| LagSums::of(u, tau)).collect();
            let total_m: f64 = sums.iter().map(|s| s.m).sum();
            let sq_bar = sums.iter().map(|s| s.sq).sum::<f64>() / total_m;
            let lin_bar = sums.iter().map(|s| s.lin).sum::<f64>() / total_m;
            let vals: Vec<f64> = sums
                .iter()
                .map(|s| scale * ((s.cross - sq_bar * s.lin - lin_bar * s.sq) / s.m + sq_bar * lin_bar))
                .collect();
            let value = mean(&vals);
            let stderr =
                if vals.len() >= 2 { (crate::numeric::variance(&vals) / vals.len() as f64).sqrt() } else { f64::NAN };
            LeveragePoint { lag: tau, value, stderr }
        })
        .collect())
}

struct LagSums {
    cross: f64,
    sq: f64,
    lin: f64,
    m: f64,
}

impl LagSums {
    fn of(r: &[f64], tau: i64) -> Self {
        let n = r.len() as i64;
        let (lo, hi) = if tau >= 0 { (0, n - tau) } else { (-tau, n) };
        let mut cross = KahanSum::default();
        let mut sq = KahanSum::default();
        let mut lin = KahanSum::default();
        for t in lo..hi {
            let a = r[(t + tau) as usize];
            let b = r[t as usize];
            cross.add(a * a * b);
            sq.add(a * a);
            lin.add(b);
        }
        Self { cross: cross.total(), sq: sq.total(), lin: lin.total(), m: (hi - lo) as f64 }
    }
}

/// Sample autocorrelation at each lag, normalized by the lag-0 variance.
pub fn autocorrelation(series: &[f64], lags: &[usize]) -> Result<Vec<(usize, f64)>> {
    let n = series.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    if let Some(&bad) = lags.iter().find(|&&l| 2 * l >= n) {
        return Err(Error::InsufficientData { needed: 2 * bad + 1, got: n });
    }
    let m = mean(series);
    let d: Vec<f64> = series.iter().map(|x| x - m).collect();
    let mut c0 = KahanSum::default();
    for x in &d {
        c0.add(x * x);
    }
    let c0 = c0.total();
    if !(c0 > 0.0) {
        return Err(Error::Domain("autocorrelation of a constant series is undefined".into()));
    }
    Ok(lags
        .iter()
        .map(|&lag| {
            let mut c = KahanSum::default();
            for i in 0..n - lag {
                c.add(d[i] * d[i + lag]);
            }
            (lag, c.total() / c0)
        })
        .collect())
}

/// Settings for [`estimate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Induced-volatility window in samples.
    pub window: usize,
    /// Samples per observation step `delta`.
    pub stride: usize,
    pub estimator: VarianceEstimator,
    /// Lags for the scaling fit; `None` selects [`default_lags`].
    pub lags: Option<Vec<usize>>,
    pub leverage_max_lag: usize,
    pub normalized_leverage: bool,
    pub acf_max_lag: usize,
    /// Smallest resolvable volatility; induced values below it are raised to
    /// it. Zero leaves them untouched, so a flat window is an error.
    #[serde(default)]
    pub vol_floor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 21,
            stride: 1,
            estimator: VarianceEstimator::Realized,
            lags: None,
            leverage_max_lag: 20,
            normalized_leverage: false,
            acf_max_lag: 20,
            vol_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub induced_vol: Vec<f64>,
    pub beta_hat: f64,
    pub intercept: f64,
    pub r_sigma: Vec<f64>,
    pub hurst_hat: f64,
    pub hurst_stderr: f64,
    pub scaling_points: Vec<(usize, f64)>,
    pub leverage: Vec<LeveragePoint>,
    pub acf: Vec<(usize, f64)>,
}

/// Full pipeline on one log-price series sampled every `dt`.
///
/// Induced volatility is computed on sliding windows and read every `stride`
/// samples (the observation scale), starting with the first full window.
pub fn estimate(log_prices: &[f64], dt: f64, cfg: &PipelineConfig) -> Result<EstimationReport> {
    if cfg.stride == 0 {
        return Err(Error::Config("stride must be at least 1".into()));
    }
    let induced = induced_volatility(log_prices, cfg.window, dt, cfg.estimator)?;
    let sampled: Vec<f64> = induced.iter().step_by(cfg.stride).map(|&v| v.max(cfg.vol_floor)).collect();
    let decomposition = integrated_logvol_decompose(&sampled, cfg.stride as f64 * dt)?;
    let lags = cfg.lags.clone().unwrap_or_else(|| default_lags(decomposition.r_sigma.len()));
    let scaling = scaling_exponent(&decomposition.r_sigma, &lags)?;
    let returns: Vec<f64> = log_prices.windows(2).map(|w| w[1] - w[0]).collect();
    let leverage = if returns.len() > 2 * cfg.leverage_max_lag {
        leverage(&[&returns], cfg.leverage_max_lag, cfg.normalized_leverage)?
    } else {
        Vec::new()
    };
    let acf_lags: Vec<usize> = (0..=cfg.acf_max_lag).filter(|&l| 2 * l < returns.len()).collect();
    let acf = autocorrelation(&returns, &acf_lags).unwrap_or_default();
    Ok(EstimationReport {
        induced_vol: sampled,
        beta_hat: decomposition.beta_hat,
        intercept: decomposition.intercept,
        r_sigma: decomposition.r_sigma,
        hurst_hat: scaling.hurst_hat,
        hurst_stderr: scaling.stderr,
        scaling_points: scaling.points,
        leverage,
        acf,
    })
}
