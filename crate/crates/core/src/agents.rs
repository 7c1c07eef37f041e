//! Strategy-agent market: value investors and trend followers trading a
//! single asset through a nonlinear impact function.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate, EstimationReport, PipelineConfig};
use crate::rng::{self, lane, Rng};
use crate::sim::MarketPath;

/// Four entries in `{-1, 0, 1}`: the action taken in each of the four
/// misprice/trend regimes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i8; 4]", into = "[i8; 4]")]
pub struct Strategy([i8; 4]);

impl Strategy {
    pub const FUNDAMENTAL: Strategy = Strategy([1, 1, -1, -1]);
    pub const TREND: Strategy = Strategy([1, -1, 1, -1]);

    pub fn new(entries: [i8; 4]) -> Result<Self> {
        if let Some(e) = entries.iter().find(|e| !(-1..=1).contains(*e)) {
            return Err(Error::Domain(format!("strategy entry {e} is not in {{-1, 0, 1}}")));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> [i8; 4] {
        self.0
    }

    /// Label in `0..=80`, `sum_k 3^k (alpha_{3-k} + 1)`.
    pub fn code(&self) -> u8 {
        (0..4).map(|k| 3u8.pow(k as u32) * (self.0[3 - k] + 1) as u8).sum()
    }

    pub fn decode(code: u8) -> Result<Self> {
        if code > 80 {
            return Err(Error::Domain(format!("strategy code {code} exceeds 80")));
        }
        let mut e = [0i8; 4];
        let mut c = code;
        for k in 0..4 {
            e[3 - k] = (c % 3) as i8 - 1;
            c /= 3;
        }
        Ok(Self(e))
    }

    fn dot(&self, gamma: &[f64; 4]) -> f64 {
        self.0.iter().zip(gamma).map(|(&a, &g)| a as f64 * g).sum()
    }
}

impl TryFrom<[i8; 4]> for Strategy {
    type Error = Error;
    fn try_from(e: [i8; 4]) -> Result<Self> {
        Self::new(e)
    }
}

impl From<Strategy> for [i8; 4] {
    fn from(s: Strategy) -> Self {
        s.0
    }
}

pub fn strategy_code(s: &Strategy) -> u8 {
    s.code()
}

pub fn strategy_decode(code: u8) -> Result<Strategy> {
    Strategy::decode(code)
}

/// Signal function `f`: non-decreasing, from 0 at `-inf` to 1 at `+inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalFn {
    /// Heaviside step with `f(0) = 1`.
    Step,
    Logistic {
        beta: f64,
    },
}

impl SignalFn {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            SignalFn::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            SignalFn::Logistic { beta } => 1.0 / (1.0 + (-beta * x).exp()),
        }
    }
}

/// Regime weights from the misprice `xi - z` and the trend `z_t - z_{t-1}`.
pub fn info_vector(misprice: f64, trend: f64, f: SignalFn) -> [f64; 4] {
    let (fm, ft) = (f.eval(misprice), f.eval(trend));
    [fm * ft, fm * (1.0 - ft), (1.0 - fm) * ft, (1.0 - fm) * (1.0 - ft)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Impact {
    pub lambda0: f64,
    pub lambda1: f64,
    pub alpha: f64,
}

impl Default for Impact {
    fn default() -> Self {
        Self { lambda0: 1.0e4, lambda1: 1.0, alpha: 0.5 }
    }
}

impl Impact {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0 > 0.0) || !(self.lambda1 >= 0.0) || !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Domain(format!("invalid impact parameters {self:?}")));
        }
        Ok(())
    }
}

/// Log-price change caused by an aggregate order `omega`.
pub fn market_impact(omega: f64, p: &Impact) -> f64 {
    omega / (p.lambda0 + p.lambda1 * omega.abs().powf(p.alpha))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub cash: f64,
    pub stock: f64,
    pub strategy: Strategy,
    pub wealth0: f64,
}

impl AgentState {
    pub fn new(strategy: Strategy, cash: f64, stock: f64, price: f64) -> Self {
        Self { cash, stock, strategy, wealth0: cash + price * stock }
    }

    pub fn payoff(&self, price: f64) -> f64 {
        self.cash + price * self.stock - self.wealth0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketEnv {
    pub z: f64,
    pub z_prev: f64,
    pub xi: f64,
    pub impact: Impact,
    pub noise_sigma: f64,
    pub value_walk_sigma: f64,
    pub f: SignalFn,
    /// Money invested per unit of `strategy . gamma`.
    pub order_size: f64,
}

impl Default for MarketEnv {
    fn default() -> Self {
        Self {
            z: 0.0,
            z_prev: 0.0,
            xi: 0.0,
            impact: Impact::default(),
            noise_sigma: 0.01,
            value_walk_sigma: 0.001,
            f: SignalFn::Logistic { beta: 30.0 },
            order_size: 1.0,
        }
    }
}

impl MarketEnv {
    pub fn validate(&self) -> Result<()> {
        self.impact.validate()?;
        if !(self.noise_sigma >= 0.0 && self.value_walk_sigma >= 0.0 && self.order_size >= 0.0) {
            return Err(Error::Domain("noise, value walk and order size must be nonnegative".into()));
        }
        if let SignalFn::Logistic { beta } = self.f {
            if !(beta > 0.0) {
                return Err(Error::Domain(format!("logistic beta = {beta} must be positive")));
            }
        }
        Ok(())
    }

    pub fn price(&self) -> f64 {
        self.z.exp()
    }
}

/// What one step did, for bookkeeping checks.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub omega: f64,
    pub price: f64,
    pub orders: Vec<f64>,
}

/// Advance the market by one period and settle every order at the new price.
pub fn step(env: &mut MarketEnv, agents: &mut [AgentState], rng: &mut Rng) -> Result<StepRecord> {
    if agents.is_empty() {
        return Err(Error::EmptyRequest("the population is empty"));
    }
    let gamma = info_vector(env.xi - env.z, env.z - env.z_prev, env.f);
    let orders: Vec<f64> = agents.iter().map(|a| env.order_size * a.strategy.dot(&gamma)).collect();
    let omega: f64 = orders.iter().sum();
    let eta = env.noise_sigma * rng::normal(rng);
    let walk = env.value_walk_sigma * rng::normal(rng);
    env.z_prev = env.z;
    env.z += market_impact(omega, &env.impact) + eta;
    env.xi += walk;
    let price = env.price();
    for (a, &o) in agents.iter_mut().zip(&orders) {
        a.cash -= o;
        a.stock += o / price;
    }
    Ok(StepRecord { omega, price, orders })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub period: usize,
    pub copiers: usize,
    pub mutation_prob: f64,
    /// Replace uniformly chosen agents instead of the worst performers.
    pub random_selection: bool,
}

impl EvolutionParams {
    pub fn validate(&self, population: usize) -> Result<()> {
        if self.period == 0 {
            return Err(Error::Config("evolution period must be at least 1".into()));
        }
        if self.copiers > population {
            return Err(Error::Config(format!("{} copiers exceed population {population}", self.copiers)));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(Error::Config(format!("mutation probability {} outside [0, 1]", self.mutation_prob)));
        }
        Ok(())
    }
}

/// Replace `copiers` agents' strategies with those of the best performers,
/// each copy mutating one component with probability `mutation_prob`.
/// Returns the indices of the agents that copied.
pub fn evolve(agents: &mut [AgentState], price: f64, evo: &EvolutionParams, rng: &mut Rng) -> Result<Vec<usize>> {
    evo.validate(agents.len())?;
    let s = evo.copiers;
    if s == 0 {
        return Ok(Vec::new());
    }
    let mut order: Vec<usize> = (0..agents.len()).collect();
    order.shuffle(rng);
    order.sort_by(|&i, &j| agents[j].payoff(price).total_cmp(&agents[i].payoff(price)));
    let best: Vec<Strategy> = order[..s].iter().map(|&i| agents[i].strategy).collect();
    let replaced: Vec<usize> = if evo.random_selection {
        order.clone().choose_multiple(rng, s).copied().collect()
    } else {
        order[order.len() - s..].to_vec()
    };
    for &i in &replaced {
        let mut e = best[rng.random_range(0..s)].entries();
        if rng.random::<f64>() < evo.mutation_prob {
            e[rng.random_range(0..4)] = rng.random_range(-1..=1);
        }
        agents[i].strategy = Strategy(e);
    }
    Ok(replaced)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmConfig {
    /// Initial population as `(strategy code, count)` pairs.
    pub population: Vec<(u8, usize)>,
    pub steps: usize,
    /// Steps discarded before the series is recorded.
    pub burn_in: usize,
    pub seed: u64,
    pub env: MarketEnv,
    pub evolution: Option<EvolutionParams>,
    pub initial_cash: f64,
    pub initial_stock: f64,
    pub estimation: PipelineConfig,
}

impl AbmConfig {
    /// Half fundamental (72), half trend following (60), no evolution.
    pub fn mixed(n_agents: usize, steps: usize, seed: u64) -> Self {
        Self {
            population: vec![(72, n_agents / 2), (60, n_agents - n_agents / 2)],
            steps,
            burn_in: 1000,
            seed,
            env: MarketEnv::default(),
            evolution: None,
            initial_cash: 0.0,
            initial_stock: 0.0,
            estimation: PipelineConfig { window: 32, stride: 32, ..PipelineConfig::default() },
        }
    }

    /// Every agent fundamental, with evolution.
    pub fn fundamental(n_agents: usize, steps: usize, seed: u64) -> Self {
        Self {
            population: vec![(72, n_agents)],
            evolution: Some(EvolutionParams { period: 100, copiers: 5, mutation_prob: 0.1, random_selection: false }),
            ..Self::mixed(n_agents, steps, seed)
        }
    }

    pub fn n_agents(&self) -> usize {
        self.population.iter().map(|&(_, n)| n).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbmRun {
    /// Prices per step; log-volatility is not modelled and is NaN.
    pub path: MarketPath,
    pub report: EstimationReport,
    /// Log-price increments.
    pub increments: Vec<f64>,
    /// Final population as `(strategy code, count)`, sorted by code.
    pub shares: Vec<(u8, usize)>,
}

impl AbmRun {
    pub fn share_of(&self, code: u8) -> f64 {
        let total: usize = self.shares.iter().map(|&(_, n)| n).sum();
        let n = self.shares.iter().find(|&&(c, _)| c == code).map_or(0, |&(_, n)| n);
        n as f64 / total as f64
    }
}

pub fn initial_population(cfg: &AbmConfig) -> Result<Vec<AgentState>> {
    let price = cfg.env.price();
    let mut agents = Vec::with_capacity(cfg.n_agents());
    for &(code, count) in &cfg.population {
        let s = Strategy::decode(code)?;
        agents.extend((0..count).map(|_| AgentState::new(s, cfg.initial_cash, cfg.initial_stock, price)));
    }
    if agents.is_empty() {
        return Err(Error::EmptyRequest("the population is empty"));
    }
    Ok(agents)
}

pub fn run_experiment(cfg: &AbmConfig) -> Result<AbmRun> {
    cfg.env.validate()?;
    if let Some(evo) = &cfg.evolution {
        evo.validate(cfg.n_agents())?;
    }
    if cfg.steps == 0 {
        return Err(Error::EmptyRequest("steps must be at least 1"));
    }
    let mut agents = initial_population(cfg)?;
    let mut env = cfg.env;
    let mut rng = rng::substream(cfg.seed, 0, lane::AGENTS);
    let mut log_prices = Vec::with_capacity(cfg.steps + 1);
    for t in 0..cfg.burn_in + cfg.steps {
        if t == cfg.burn_in {
            log_prices.push(env.z);
        }
        step(&mut env, &mut agents, &mut rng)?;
        if t >= cfg.burn_in {
            log_prices.push(env.z);
        }
        if let Some(evo) = &cfg.evolution {
            if (t + 1) % evo.period == 0 {
                evolve(&mut agents, env.price(), evo, &mut rng)?;
            }
        }
    }
    let report = estimate(&log_prices, 1.0, &cfg.estimation)?;
    let increments: Vec<f64> = log_prices.windows(2).map(|w| w[1] - w[0]).collect();
    let mut counts = [0usize; 81];
    for a in &agents {
        counts[a.strategy.code() as usize] += 1;
    }
    let shares = (0u8..81).filter(|&c| counts[c as usize] > 0).map(|c| (c, counts[c as usize])).collect();
    let n = log_prices.len();
    let path = MarketPath {
        times: (0..n).map(|i| i as f64).collect(),
        prices: log_prices.iter().map(|z| z.exp()).collect(),
        logvol: vec![f64::NAN; n],
        seed: cfg.seed,
    };
    Ok(AbmRun { path, report, increments, shares })
}
