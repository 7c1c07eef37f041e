use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fracvol::agents::{run_experiment, AbmConfig, EvolutionParams, SignalFn};
use fracvol::estimation::{estimate, PipelineConfig, VarianceEstimator};
use fracvol::fgn::{generate_fgn, HurstExponent};
use fracvol::lob::{run_lob, LobParams};
use fracvol::options::{
    black_scholes, implied_vol, monte_carlo_price, price, smile_surface, DispersionRule, OptionInputs, SmileGrid,
    VolDispersion,
};
use fracvol::returns::{ReturnDist, ReturnDistParams};
use fracvol::sim::{calibrate_kprime, Coupling, FracVolSimulator, IdentifiedSimulator, MarketPath, ModelParams};
use fracvol_cli::config::{parse_population, KeyValues};
use fracvol_cli::ingest_prices;
use fracvol_cli::io::{write_csv, write_json, write_paths};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(
    name = "fracvol",
    version,
    about = "Fractional volatility models: simulation, estimation, pricing and agent markets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate price and log-volatility paths
    Simulate(SimulateArgs),
    /// Run the estimation pipeline on a `t,price` CSV
    Estimate(EstimateArgs),
    /// Tabulate the return density and its tail law
    Pdf(PdfArgs),
    /// Price one European call
    Price(PriceArgs),
    /// Price and implied-volatility surface over moneyness and maturity
    Smile(SmileArgs),
    /// Run the strategy-agent market
    Abm(AbmArgs),
    /// Run the random limit-order book
    Lob(LobArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CouplingArg {
    Independent,
    Identified,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum EstimatorArg {
    Realized,
    Levels,
    DetrendedLevels,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum DispersionArg {
    Marginal,
    Averaged,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// Hurst exponent of the log-volatility noise
    #[arg(long, default_value_t = 0.83)]
    hurst: f64,
    /// Volatility intensity
    #[arg(long, default_value_t = 0.59)]
    k: f64,
    /// Mean log-volatility
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    beta: f64,
    /// Observation time scale
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Drift per unit time
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu: f64,
}

impl ModelArgs {
    fn params(&self) -> fracvol::Result<ModelParams> {
        ModelParams::new(self.mu, self.beta, self.k, self.delta, self.hurst)
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Seed of the random streams
    #[arg(long)]
    seed: u64,
    /// Number of time steps
    #[arg(long, default_value_t = 4096)]
    steps: usize,
    /// Number of independent paths
    #[arg(long, default_value_t = 1)]
    paths: usize,
    /// Step length (defaults to delta)
    #[arg(long)]
    dt: Option<f64>,
    /// Initial price
    #[arg(long, default_value_t = 1.0)]
    spot: f64,
    #[arg(long, value_enum, default_value_t = CouplingArg::Independent)]
    coupling: CouplingArg,
    /// Kernel amplitude for identified drivers (defaults to the calibrated value, negated)
    #[arg(long, allow_hyphen_values = true)]
    kprime: Option<f64>,
    /// Kernel window for identified drivers
    #[arg(long, default_value_t = fracvol::sim::DEFAULT_HISTORY)]
    history: usize,
    /// Write only the fractional noise (`index,value`)
    #[arg(long)]
    noise_only: bool,
    #[arg(long, default_value = "simulate.csv")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Induced-volatility window in samples
    #[arg(long, default_value_t = 21)]
    window: usize,
    /// Samples per observation step
    #[arg(long, default_value_t = 1)]
    stride: usize,
    #[arg(long, value_enum, default_value_t = EstimatorArg::Realized)]
    estimator: EstimatorArg,
    /// Smallest resolvable volatility
    #[arg(long, default_value_t = 0.0)]
    vol_floor: f64,
}

impl PipelineArgs {
    fn config(&self) -> PipelineConfig {
        PipelineConfig {
            window: self.window,
            stride: self.stride,
            estimator: match self.estimator {
                EstimatorArg::Realized => VarianceEstimator::Realized,
                EstimatorArg::Levels => VarianceEstimator::Levels,
                EstimatorArg::DetrendedLevels => VarianceEstimator::DetrendedLevels,
            },
            vol_floor: self.vol_floor,
            ..PipelineConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct EstimateArgs {
    /// CSV with `t,price` columns
    input: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    /// `csv` writes the residual R_sigma as `index,value`
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct PdfArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Return horizon
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, allow_hyphen_values = true)]
    r_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r_max: Option<f64>,
    #[arg(long, default_value_t = 401)]
    points: usize,
    #[arg(long, default_value = "pdf.csv")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct OptionArgs {
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,
    #[arg(long, default_value_t = 0.001, allow_hyphen_values = true)]
    rate: f64,
    /// Volatility intensity
    #[arg(long, default_value_t = 1.0)]
    k: f64,
    #[arg(long, default_value_t = 0.8)]
    hurst: f64,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    /// Dispersion of the mean log-volatility (overrides k, hurst, delta)
    #[arg(long)]
    alpha_disp: Option<f64>,
    #[arg(long, value_enum, default_value_t = DispersionArg::Marginal)]
    dispersion: DispersionArg,
}

impl OptionArgs {
    fn model(&self) -> fracvol::Result<ModelParams> {
        ModelParams::new(self.rate, self.sigma.ln(), self.k, self.delta, self.hurst)
    }

    fn rule(&self) -> DispersionRule {
        match (self.alpha_disp, self.dispersion) {
            (Some(a), _) => DispersionRule::Fixed(a),
            (None, DispersionArg::Marginal) => DispersionRule::Marginal,
            (None, DispersionArg::Averaged) => DispersionRule::Averaged,
        }
    }
}

#[derive(Args, Debug)]
struct PriceArgs {
    #[command(flatten)]
    opt: OptionArgs,
    #[arg(long, default_value_t = 1.0)]
    spot: f64,
    #[arg(long, default_value_t = 1.0)]
    strike: f64,
    #[arg(long, default_value_t = 20.0)]
    tau: f64,
    /// Also estimate the price by Monte Carlo over this many paths
    #[arg(long)]
    paths: Option<usize>,
    /// Seed for the Monte Carlo estimate
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "price.json")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct SmileArgs {
    #[command(flatten)]
    opt: OptionArgs,
    #[arg(long, default_value_t = 11)]
    moneyness_points: usize,
    #[arg(long, default_value_t = 20)]
    maturity_points: usize,
    #[arg(long, default_value = "smile.csv")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct AbmArgs {
    /// Key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Money invested per unit signal
    #[arg(long)]
    order_size: Option<f64>,
    #[arg(long, default_value = "abm.csv")]
    out: PathBuf,
    /// Estimation report path (defaults to the output with `.report.json`)
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Args, Debug)]
struct LobArgs {
    /// Key-value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Half-width w of the price window, in slots
    #[arg(long)]
    width: Option<usize>,
    /// Size of each limit order
    #[arg(long)]
    order_size: Option<f64>,
    /// Per-step event log `step,event,slot,price`
    #[arg(long)]
    book_trace: Option<PathBuf>,
    #[arg(long, default_value = "lob.csv")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<fracvol::Error> for Failure {
    fn from(e: fracvol::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<Value, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("{}", json!({ "error": "usage", "message": e.to_string() }));
        return ExitCode::from(2);
    }
    let started = Instant::now();
    let (name, result) = match cli.command {
        Command::Simulate(a) => ("simulate", simulate(a)),
        Command::Estimate(a) => ("estimate", estimate_cmd(a)),
        Command::Pdf(a) => ("pdf", pdf(a)),
        Command::Price(a) => ("price", price_cmd(a)),
        Command::Smile(a) => ("smile", smile(a)),
        Command::Abm(a) => ("abm", abm(a)),
        Command::Lob(a) => ("lob", lob(a)),
    };
    match result {
        Ok(mut summary) => {
            summary["command"] = json!(name);
            summary["wall_time_s"] = json!(started.elapsed().as_secs_f64());
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("{}", json!({ "command": name, "error": "usage", "message": msg }));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("{}", json!({ "command": name, "error": "runtime", "message": format!("{e:#}") }));
            ExitCode::from(1)
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("FRACVOL_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| anyhow!("FRACVOL_THREADS = `{v}` is not a thread count"))?;
        if n == 0 {
            return Err(anyhow!("FRACVOL_THREADS must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn require_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64, Failure> {
    flag.or(file).ok_or_else(|| Failure::Usage("a seed is required: pass --seed or set `seed` in the config".into()))
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut params = a.model.params()?;
    let dt = a.dt.unwrap_or(params.delta);
    if a.paths == 0 {
        return Err(Failure::Usage("--paths must be at least 1".into()));
    }
    if a.noise_only {
        let noise = generate_fgn(a.steps, HurstExponent::new(a.model.hurst)?, params.delta, a.seed)?;
        #[derive(Serialize)]
        struct Row {
            index: usize,
            value: f64,
        }
        match a.format {
            Format::Csv => {
                write_csv(&a.out, noise.values.iter().enumerate().map(|(index, &value)| Row { index, value }))?
            }
            Format::Json => write_json(&a.out, &noise)?,
        }
        return Ok(json!({ "seed": a.seed, "output": a.out, "rows": a.steps }));
    }
    let paths: Vec<MarketPath> = match a.coupling {
        CouplingArg::Independent => {
            let sim = FracVolSimulator::new(&params, a.steps, dt)?;
            (0..a.paths as u64).into_par_iter().map(|p| sim.path(a.spot, a.seed, p)).collect::<fracvol::Result<_>>()?
        }
        CouplingArg::Identified => {
            params.coupling = Coupling::Identified;
            params.kprime = a.kprime.unwrap_or_else(|| -calibrate_kprime(&params, dt, a.history));
            let sim = IdentifiedSimulator::new(&params, a.steps, dt, a.history)?;
            (0..a.paths as u64).into_par_iter().map(|p| sim.path(a.spot, a.seed, p)).collect::<fracvol::Result<_>>()?
        }
    };
    match a.format {
        Format::Csv => write_paths(&a.out, &paths)?,
        Format::Json => write_json(&a.out, &paths)?,
    }
    Ok(json!({ "seed": a.seed, "output": a.out, "rows": a.steps + 1, "paths": a.paths }))
}

fn uniform_dt(times: &[f64]) -> anyhow::Result<f64> {
    let n = times.len();
    if n < 2 {
        return Err(anyhow!("need at least two observations"));
    }
    Ok((times[n - 1] - times[0]) / (n - 1) as f64)
}

fn estimate_cmd(a: EstimateArgs) -> Outcome {
    let path = ingest_prices(&a.input).map_err(anyhow::Error::from)?;
    let dt = uniform_dt(&path.times)?;
    let report = estimate(&path.log_prices(), dt, &a.pipeline.config())?;
    write_report(&a.out, a.format, &report)?;
    Ok(json!({ "input": a.input, "output": a.out, "hurst_hat": report.hurst_hat, "beta_hat": report.beta_hat }))
}

fn write_report(out: &Path, format: Format, report: &fracvol::estimation::EstimationReport) -> anyhow::Result<()> {
    #[derive(Serialize)]
    struct Row {
        index: usize,
        value: f64,
    }
    match format {
        Format::Json => write_json(out, report),
        Format::Csv => write_csv(out, report.r_sigma.iter().enumerate().map(|(index, &value)| Row { index, value })),
    }
}

fn pdf(a: PdfArgs) -> Outcome {
    let m = &a.model;
    let params = ReturnDistParams::new(m.beta, m.k, m.delta, m.hurst, m.mu, a.tau)?;
    let dist = ReturnDist::new(params)?;
    let lo = a.r_min.unwrap_or_else(|| dist.quantile(1e-6));
    let hi = a.r_max.unwrap_or_else(|| dist.quantile(1.0 - 1e-6));
    if a.points < 2 || !(hi > lo) {
        return Err(Failure::Usage("need --points >= 2 and r_max > r_min".into()));
    }
    let grid: Vec<f64> = (0..a.points).map(|i| lo + (hi - lo) * i as f64 / (a.points - 1) as f64).collect();
    let in_regime: Vec<f64> = grid.iter().copied().filter(|&r| params.lambda(r) > std::f64::consts::E).collect();
    let prefactor = if in_regime.is_empty() { f64::NAN } else { dist.fit_tail_prefactor(&in_regime)? };
    #[derive(Serialize)]
    struct Row {
        r: f64,
        pdf: f64,
        tail: f64,
    }
    let rows: Vec<Row> = grid
        .par_iter()
        .map(|&r| Row { r, pdf: dist.pdf(r), tail: dist.tail_asymptotic(r, prefactor).unwrap_or(f64::NAN) })
        .collect();
    match a.format {
        Format::Csv => write_csv(&a.out, rows)?,
        Format::Json => write_json(&a.out, &json!({ "params": params, "tail_prefactor": prefactor, "rows": rows }))?,
    }
    Ok(json!({ "output": a.out, "rows": a.points, "tail_prefactor": prefactor }))
}

#[derive(Serialize)]
struct SurfaceRow {
    moneyness: f64,
    tau: f64,
    price: f64,
    implied_vol: Option<f64>,
    delta_vs_bs: f64,
}

fn price_cmd(a: PriceArgs) -> Outcome {
    let model = a.opt.model()?;
    let opt = OptionInputs { spot: a.spot, strike: a.strike, rate: a.opt.rate, sigma_t: a.opt.sigma, tau: a.tau };
    let disp: VolDispersion = a.opt.rule().resolve(&model, a.tau)?;
    let v = price(&opt, disp)?;
    let bs = black_scholes(&opt);
    let iv = implied_vol(v, &opt).ok();
    let mut summary = json!({ "output": a.out, "price": v, "alpha": disp.alpha });
    let mc = match a.paths {
        None => None,
        Some(n) => {
            let seed = require_seed(a.seed, None)?;
            summary["seed"] = json!(seed);
            Some(monte_carlo_price(&opt, &model, n, seed)?)
        }
    };
    match a.format {
        Format::Json => write_json(
            &a.out,
            &json!({ "inputs": opt, "alpha": disp.alpha, "price": v, "black_scholes": bs, "implied_vol": iv, "monte_carlo": mc }),
        )?,
        Format::Csv => write_csv(
            &a.out,
            [SurfaceRow { moneyness: a.spot / a.strike, tau: a.tau, price: v, implied_vol: iv, delta_vs_bs: v - bs }],
        )?,
    }
    Ok(summary)
}

fn smile(a: SmileArgs) -> Outcome {
    let model = a.opt.model()?;
    if a.moneyness_points == 0 || a.maturity_points == 0 {
        return Err(Failure::Usage("grid sizes must be at least 1".into()));
    }
    let grid = SmileGrid::default_axes(a.moneyness_points, a.maturity_points, a.opt.rate);
    let surface = smile_surface(&grid, &model, a.opt.sigma, a.opt.rule())?;
    match a.format {
        Format::Csv => write_csv(
            &a.out,
            surface.iter().map(|p| SurfaceRow {
                moneyness: p.moneyness,
                tau: p.tau,
                price: p.price,
                implied_vol: p.implied_vol,
                delta_vs_bs: p.delta_vs_bs,
            }),
        )?,
        Format::Json => write_json(&a.out, &surface)?,
    }
    Ok(json!({ "output": a.out, "rows": surface.len() }))
}

const ABM_KEYS: &[&str] = &[
    "population",
    "steps",
    "burn_in",
    "seed",
    "lambda0",
    "lambda1",
    "impact_alpha",
    "noise_sigma",
    "value_walk_sigma",
    "signal",
    "signal_beta",
    "order_size",
    "evolution",
    "period",
    "copiers",
    "mutation_prob",
    "random_selection",
    "initial_cash",
    "initial_stock",
    "window",
    "stride",
    "vol_floor",
];

fn abm_config(kv: &KeyValues) -> anyhow::Result<AbmConfig> {
    kv.check_known(ABM_KEYS)?;
    let mut c = AbmConfig::mixed(100, 1 << 16, 0);
    if let Some(p) = kv.raw("population") {
        c.population = parse_population(p)?;
    }
    macro_rules! set {
        ($key:literal, $field:expr) => {
            if let Some(v) = kv.get($key)? {
                $field = v;
            }
        };
    }
    set!("steps", c.steps);
    set!("burn_in", c.burn_in);
    set!("seed", c.seed);
    set!("lambda0", c.env.impact.lambda0);
    set!("lambda1", c.env.impact.lambda1);
    set!("impact_alpha", c.env.impact.alpha);
    set!("noise_sigma", c.env.noise_sigma);
    set!("value_walk_sigma", c.env.value_walk_sigma);
    set!("order_size", c.env.order_size);
    set!("initial_cash", c.initial_cash);
    set!("initial_stock", c.initial_stock);
    set!("window", c.estimation.window);
    set!("stride", c.estimation.stride);
    set!("vol_floor", c.estimation.vol_floor);
    let beta: Option<f64> = kv.get("signal_beta")?;
    c.env.f = match kv.raw("signal") {
        None | Some("logistic") => SignalFn::Logistic { beta: beta.unwrap_or(30.0) },
        Some("step") => SignalFn::Step,
        Some(other) => return Err(anyhow!("signal must be `step` or `logistic`, not `{other}`")),
    };
    if kv.get::<bool>("evolution")?.unwrap_or(false) {
        let mut evo = EvolutionParams { period: 100, copiers: 5, mutation_prob: 0.1, random_selection: false };
        set!("period", evo.period);
        set!("copiers", evo.copiers);
        set!("mutation_prob", evo.mutation_prob);
        set!("random_selection", evo.random_selection);
        c.evolution = Some(evo);
    }
    Ok(c)
}

fn abm(a: AbmArgs) -> Outcome {
    let kv = match &a.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    let mut cfg = abm_config(&kv)?;
    cfg.seed = require_seed(a.seed, kv.get("seed")?)?;
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    if let Some(o) = a.order_size {
        cfg.env.order_size = o;
    }
    let run = run_experiment(&cfg)?;
    match a.format {
        Format::Csv => write_paths(&a.out, std::slice::from_ref(&run.path))?,
        Format::Json => write_json(&a.out, &run.path)?,
    }
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("report.json"));
    write_json(&report_path, &json!({ "config": cfg, "report": run.report, "shares": run.shares }))?;
    Ok(json!({
        "seed": cfg.seed, "output": a.out, "report": report_path,
        "rows": run.path.len(), "hurst_hat": run.report.hurst_hat,
    }))
}

const LOB_KEYS: &[&str] =
    &["width", "order_size", "event_probs", "steps", "seed", "slot_size", "initial_price", "sides_only", "burn_in"];

fn lob_config(kv: &KeyValues) -> anyhow::Result<LobParams> {
    kv.check_known(LOB_KEYS)?;
    let mut p = LobParams::default();
    if let Some(v) = kv.get("width")? {
        p.half_width = v;
    }
    if let Some(v) = kv.get("order_size")? {
        p.order_size = v;
    }
    if let Some(v) = kv.get("steps")? {
        p.steps = v;
    }
    if let Some(v) = kv.get("slot_size")? {
        p.slot_size = v;
    }
    if let Some(v) = kv.get("initial_price")? {
        p.initial_price = v;
    }
    if let Some(v) = kv.get("sides_only")? {
        p.sides_only = v;
    }
    if let Some(v) = kv.get("burn_in")? {
        p.burn_in = Some(v);
    }
    if let Some(s) = kv.raw("event_probs") {
        let v: Vec<f64> = s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>().context("event_probs")?;
        p.event_probs = v.try_into().map_err(|_| anyhow!("event_probs needs four comma-separated values"))?;
    }
    Ok(p)
}

fn lob(a: LobArgs) -> Outcome {
    let kv = match &a.config {
        Some(p) => KeyValues::load(p)?,
        None => KeyValues::default(),
    };
    let mut p = lob_config(&kv)?;
    p.seed = require_seed(a.seed, kv.get("seed")?)?;
    if let Some(v) = a.steps {
        p.steps = v;
    }
    if let Some(v) = a.width {
        p.half_width = v;
    }
    if let Some(v) = a.order_size {
        p.order_size = v;
    }
    let run = run_lob(&p, a.book_trace.is_some())?;
    match a.format {
        Format::Csv => write_paths(&a.out, std::slice::from_ref(&run.path))?,
        Format::Json => write_json(&a.out, &run.path)?,
    }
    if let (Some(tp), Some(trace)) = (&a.book_trace, &run.trace) {
        #[derive(Serialize)]
        struct Row {
            step: usize,
            event: &'static str,
            slot: Option<i64>,
            price: f64,
        }
        write_csv(
            tp,
            trace.iter().enumerate().map(|(i, r)| Row {
                step: i + 1,
                event: r.event.name(),
                slot: r.slot,
                price: run.slot_price(&p, r.price_slot),
            }),
        )?;
    }
    Ok(json!({ "seed": p.seed, "output": a.out, "rows": run.path.len(), "trace": a.book_trace }))
}
