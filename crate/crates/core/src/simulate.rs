//! Exact event-driven Monte Carlo of the controlled surplus.
//!
//! Between jumps the surplus decreases linearly, so ruin times, continuous
//! yield payments and their discounting are all closed-form per segment. No
//! time discretization is involved.
//!
//! Each path draws from its own ChaCha stream selected by the path index, and
//! estimates are reduced in index order, so results do not depend on how many
//! worker threads run the paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lundberg::{self, ModelParams, RootError};

/// Remaining discount factor below which further dividends are ignored.
pub const DISCOUNT_FLOOR: f64 = 1e-10;
pub const DEFAULT_T_MAX: f64 = 1e4;
pub const DEFAULT_SAFE_LEVEL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_PATHS: usize = 100_000;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// Parametric dividend policies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Strategy {
    /// Never pays.
    #[serde(rename = "none")]
    NoDividend,
    /// Pays any overflow above `b` at once; pays `x0 - b` at time zero if `x0 > b`.
    Barrier { b: f64 },
    /// Pays nothing until the surplus first reaches `level`, then the constant
    /// yield `(1 - eps) * (lambda E[Y] - rho)` until ruin.
    ThresholdYield {
        #[serde(alias = "M")]
        level: f64,
        eps: f64,
    },
    /// Pays `x0 - eps` up front and afterwards every excess above the reserve `eps`.
    PayAllExcess { eps: f64 },
    /// Pays nothing before the horizon, then the whole surplus.
    TerminalPayout,
}

impl Strategy {
    pub fn validate(&self, m: &ModelParams) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidStrategy(msg));
        match *self {
            Strategy::NoDividend | Strategy::TerminalPayout => Ok(()),
            Strategy::Barrier { b } if !(b.is_finite() && b >= 0.0) => {
                bad(format!("barrier level must be >= 0 (got {b})"))
            }
            Strategy::PayAllExcess { eps } if !(eps.is_finite() && eps > 0.0) => {
                bad(format!("reserve eps must be > 0 (got {eps})"))
            }
            Strategy::ThresholdYield { level, eps } => {
                if !(level.is_finite() && level > 0.0) {
                    return bad(format!("threshold level must be > 0 (got {level})"));
                }
                if !(eps > 0.0 && eps < 1.0) {
                    return bad(format!("eps must lie in (0, 1) (got {eps})"));
                }
                if !m.is_profitable() {
                    return bad(format!(
                        "threshold yield needs lambda*E[Y] > rho (net drift {})",
                        m.net_drift()
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Barrier level for barrier-type strategies.
    fn cap(&self) -> Option<f64> {
        match *self {
            Strategy::Barrier { b } => Some(b),
            Strategy::PayAllExcess { eps } => Some(eps),
            _ => None,
        }
    }

    fn liquidates_at_horizon(&self) -> bool {
        !matches!(self, Strategy::NoDividend)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Horizon {
    /// Paths stop at `t`; every strategy except `NoDividend` pays out the
    /// remaining surplus there.
    Finite { t: f64 },
    /// Infinite horizon, truncated at `t_max` or once the surplus reaches a
    /// level whose ruin probability is below `safe_level_tolerance`.
    Truncated {
        #[serde(default = "default_t_max")]
        t_max: f64,
        #[serde(default = "default_tolerance")]
        safe_level_tolerance: f64,
    },
}

fn default_t_max() -> f64 {
    DEFAULT_T_MAX
}

fn default_tolerance() -> f64 {
    DEFAULT_SAFE_LEVEL_TOLERANCE
}

impl Horizon {
    pub fn infinite() -> Self {
        Horizon::Truncated { t_max: DEFAULT_T_MAX, safe_level_tolerance: DEFAULT_SAFE_LEVEL_TOLERANCE }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        match *self {
            Horizon::Finite { t } if !(t.is_finite() && t > 0.0) => {
                Err(SimError::InvalidConfig(format!("horizon T must be > 0 (got {t})")))
            }
            Horizon::Truncated { t_max, .. } if !(t_max > 0.0) => {
                Err(SimError::InvalidConfig(format!("t_max must be > 0 (got {t_max})")))
            }
            Horizon::Truncated { safe_level_tolerance: tol, .. } if !(tol > 0.0 && tol < 1.0) => {
                Err(SimError::InvalidConfig(format!("safe_level_tolerance must lie in (0, 1) (got {tol})")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    pub horizon: Horizon,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64, horizon: Horizon) -> Self {
        SimConfig { n_paths, seed, horizon }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::InvalidConfig("n_paths must be >= 1".into()));
        }
        self.horizon.validate()
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { n_paths: DEFAULT_PATHS, seed: DEFAULT_SEED, horizon: Horizon::infinite() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub discounted_dividends: f64,
    /// `None` when the path survived, was censored at `t_max`, or stopped at
    /// the safe level.
    pub ruin_time: Option<f64>,
    pub reached_threshold: bool,
    /// Surplus when the path stopped, before any horizon payout.
    pub terminal_surplus: f64,
    /// Sum of all jumps drawn.
    pub jump_total: f64,
}

/// Monte Carlo sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = neumaier_sum(samples.iter().copied()) / n as f64;
        let var = if n > 1 {
            neumaier_sum(samples.iter().map(|v| (v - mean) * (v - mean))) / (n - 1) as f64
        } else {
            0.0
        };
        Estimate { mean, std_error: (var / n as f64).sqrt(), n }
    }

    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - 1.96 * self.std_error, self.mean + 1.96 * self.std_error)
    }

    /// `|mean - target| <= k * std_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.std_error
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Estimate { mean: self.mean * factor, std_error: self.std_error * factor.abs(), n: self.n }
    }
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Objective {
    /// Estimating dividends: stop once discounting makes the rest negligible.
    Dividends,
    /// Estimating ruin functionals: follow the path until ruin or a safe level.
    Ruin,
}

/// Per-run constants shared by all paths.
struct PathPlan {
    yield_rate: f64,
    end: f64,
    finite: bool,
    /// Safe level while no yield is paid (`NoDividend` only).
    plain_safe_level: Option<f64>,
    /// Safe level once the threshold yield is active.
    yield_safe_level: Option<f64>,
}

fn safe_level(m: &ModelParams, drift: f64, tol: f64) -> Option<f64> {
    if drift == 0.0 {
        return Some(0.0);
    }
    match lundberg::solve_drift_exponent(m, drift, 0.0) {
        Ok(r) => Some(-tol.ln() / r.value),
        Err(_) => None,
    }
}

impl PathPlan {
    fn new(m: &ModelParams, s: &Strategy, horizon: &Horizon, objective: Objective) -> Result<Self, SimError> {
        m.validate().map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        s.validate(m)?;
        horizon.validate()?;
        let yield_rate = match *s {
            Strategy::ThresholdYield { eps, .. } => m.yield_rate(eps),
            _ => 0.0,
        };
        let plan = match *horizon {
            Horizon::Finite { t } => PathPlan {
                yield_rate,
                end: t,
                finite: true,
                plain_safe_level: None,
                yield_safe_level: None,
            },
            Horizon::Truncated { t_max, safe_level_tolerance: tol } => {
                if matches!(s, Strategy::TerminalPayout) {
                    return Err(SimError::InvalidStrategy(
                        "terminal payout needs a finite horizon".into(),
                    ));
                }
                let pays = !matches!(s, Strategy::NoDividend);
                if objective == Objective::Dividends && pays && m.delta == 0.0 {
                    return Err(SimError::InvalidConfig(
                        "infinite-horizon dividends with delta = 0 are unbounded; use a finite horizon".into(),
                    ));
                }
                let mut end = t_max;
                if objective == Objective::Dividends && pays {
                    end = end.min(-DISCOUNT_FLOOR.ln() / m.delta);
                }
                PathPlan {
                    yield_rate,
                    end,
                    finite: false,
                    plain_safe_level: match s {
                        Strategy::NoDividend => safe_level(m, m.rho, tol),
                        _ => None,
                    },
                    yield_safe_level: match s {
                        Strategy::ThresholdYield { .. } => safe_level(m, m.rho + yield_rate, tol),
                        _ => None,
                    },
                }
            }
        };
        Ok(plan)
    }
}

fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// `∫_{t1}^{t2} rate e^{-delta t} dt`.
fn discounted_stream(rate: f64, delta: f64, t1: f64, t2: f64) -> f64 {
    if rate == 0.0 || t2 <= t1 {
        0.0
    } else if delta == 0.0 {
        rate * (t2 - t1)
    } else {
        rate * ((-delta * t1).exp() - (-delta * t2).exp()) / delta
    }
}

fn run_path(m: &ModelParams, s: &Strategy, plan: &PathPlan, seed: u64, path_index: u64, objective: Objective) -> PathOutcome {
    let mut rng = path_rng(seed, path_index);
    let delta = m.delta;
    let discount = |t: f64| (-delta * t).exp();
    let cap = s.cap();
    let level = match *s {
        Strategy::ThresholdYield { level, .. } => level,
        _ => f64::INFINITY,
    };

    let mut t = 0.0;
    let mut x = m.x0;
    let mut dividends = 0.0;
    let mut jump_total = 0.0;
    if let Some(b) = cap {
        if x > b {
            dividends += x - b;
            x = b;
        }
    }
    let mut yield_on = x >= level;
    let mut reached = yield_on;

    loop {
        let safe = if yield_on { plan.yield_safe_level } else { plan.plain_safe_level };
        if let Some(l) = safe {
            if x >= l {
                if yield_on && objective == Objective::Dividends && delta > 0.0 {
                    dividends += plan.yield_rate * discount(t) / delta;
                }
                return PathOutcome {
                    discounted_dividends: dividends,
                    ruin_time: None,
                    reached_threshold: reached,
                    terminal_surplus: x,
                    jump_total,
                };
            }
        }
        let pay_rate = if yield_on { plan.yield_rate } else { 0.0 };
        let drain = m.rho + pay_rate;
        let u: f64 = rng.random();
        let t_jump = t - (1.0 - u).ln() / m.lambda;
        let t_ruin = if drain > 0.0 { t + x / drain } else { f64::INFINITY };

        if t_ruin <= t_jump && t_ruin <= plan.end {
            dividends += discounted_stream(pay_rate, delta, t, t_ruin);
            return PathOutcome {
                discounted_dividends: dividends,
                ruin_time: Some(t_ruin),
                reached_threshold: reached,
                terminal_surplus: 0.0,
                jump_total,
            };
        }
        if t_jump > plan.end {
            let end = plan.end;
            dividends += discounted_stream(pay_rate, delta, t, end);
            x -= drain * (end - t);
            if plan.finite && s.liquidates_at_horizon() {
                dividends += discount(end) * x;
            }
            return PathOutcome {
                discounted_dividends: dividends,
                ruin_time: None,
                reached_threshold: reached,
                terminal_surplus: x,
                jump_total,
            };
        }

        dividends += discounted_stream(pay_rate, delta, t, t_jump);
        x -= drain * (t_jump - t);
        t = t_jump;
        let y = m.jumps.sample(&mut rng);
        x += y;
        jump_total += y;
        if let Some(b) = cap {
            if x > b {
                dividends += discount(t) * (x - b);
                x = b;
            }
        }
        if !yield_on && x >= level {
            yield_on = true;
            reached = true;
        }
    }
}

/// One exact path of the surplus under `s`.
pub fn simulate_path(
    m: &ModelParams,
    s: &Strategy,
    cfg: &SimConfig,
    path_index: u64,
) -> Result<PathOutcome, SimError> {
    let plan = PathPlan::new(m, s, &cfg.horizon, Objective::Dividends)?;
    Ok(run_path(m, s, &plan, cfg.seed, path_index, Objective::Dividends))
}

fn run_all(m: &ModelParams, s: &Strategy, cfg: &SimConfig, objective: Objective) -> Result<Vec<PathOutcome>, SimError> {
    cfg.validate()?;
    let plan = PathPlan::new(m, s, &cfg.horizon, objective)?;
    Ok((0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path(m, s, &plan, cfg.seed, i, objective))
        .collect())
}

/// All path outcomes in path-index order.
pub fn simulate_paths(m: &ModelParams, s: &Strategy, cfg: &SimConfig) -> Result<Vec<PathOutcome>, SimError> {
    run_all(m, s, cfg, Objective::Dividends)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub value: Estimate,
    pub ruin_fraction: f64,
    pub reached_fraction: f64,
}

pub fn summarize(outcomes: &[PathOutcome]) -> Summary {
    let divs: Vec<f64> = outcomes.iter().map(|o| o.discounted_dividends).collect();
    let n = outcomes.len() as f64;
    Summary {
        value: Estimate::from_samples(&divs),
        ruin_fraction: outcomes.iter().filter(|o| o.ruin_time.is_some()).count() as f64 / n,
        reached_fraction: outcomes.iter().filter(|o| o.reached_threshold).count() as f64 / n,
    }
}

/// Expected discounted dividends from `m.x0`.
pub fn estimate_value(m: &ModelParams, s: &Strategy, cfg: &SimConfig) -> Result<Estimate, SimError> {
    Ok(summarize(&simulate_paths(m, s, cfg)?).value)
}

/// Mean surplus at the stopping time of each path.
pub fn estimate_terminal_surplus(m: &ModelParams, s: &Strategy, cfg: &SimConfig) -> Result<Estimate, SimError> {
    let out = simulate_paths(m, s, cfg)?;
    Ok(Estimate::from_samples(&out.iter().map(|o| o.terminal_surplus).collect::<Vec<_>>()))
}

fn ruin_functional(
    m: &ModelParams,
    s: &Strategy,
    x: f64,
    cfg: &SimConfig,
    f: impl Fn(Option<f64>) -> f64,
) -> Result<Estimate, SimError> {
    let m = m.with_x0(x);
    let out = run_all(&m, s, cfg, Objective::Ruin)?;
    Ok(Estimate::from_samples(&out.iter().map(|o| f(o.ruin_time)).collect::<Vec<_>>()))
}

/// Fraction of ruined paths without dividends, starting from `x`.
pub fn estimate_ruin_probability(m: &ModelParams, x: f64, cfg: &SimConfig) -> Result<Estimate, SimError> {
    ruin_functional(m, &Strategy::NoDividend, x, cfg, |t| if t.is_some() { 1.0 } else { 0.0 })
}

/// Ruin probability from `x` when the yield `(1 - eps) * net_drift` is paid from time zero.
pub fn estimate_tilted_ruin_probability(
    m: &ModelParams,
    x: f64,
    eps: f64,
    cfg: &SimConfig,
) -> Result<Estimate, SimError> {
    let s = Strategy::ThresholdYield { level: x, eps };
    ruin_functional(m, &s, x, cfg, |t| if t.is_some() { 1.0 } else { 0.0 })
}

/// `E_x[exp(-theta tau) 1{tau < inf}]` without dividends.
pub fn estimate_ruin_time_laplace(
    m: &ModelParams,
    x: f64,
    theta: f64,
    cfg: &SimConfig,
) -> Result<Estimate, SimError> {
    if !(theta > 0.0) {
        return Err(SimError::InvalidConfig(format!("theta must be > 0 (got {theta})")));
    }
    ruin_functional(m, &Strategy::NoDividend, x, cfg, |t| t.map_or(0.0, |t| (-theta * t).exp()))
}

/// `E_x[tau 1{tau < inf}]` without dividends.
pub fn estimate_defective_mean_ruin_time(m: &ModelParams, x: f64, cfg: &SimConfig) -> Result<Estimate, SimError> {
    ruin_functional(m, &Strategy::NoDividend, x, cfg, |t| t.unwrap_or(0.0))
}
