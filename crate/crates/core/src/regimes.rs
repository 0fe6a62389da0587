//! Parameter sweeps comparing the value function with its asymptotic limits.
//!
//! Each sweep returns a [`RegimeReport`] with one row per sweep point. Limits
//! are built from the model and the exponent solvers, never from literals.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::closed_form::{ClosedFormError, ExponentialSolution};
use crate::lundberg::{self, ModelParams, RootError};
use crate::output::format_real;
use crate::pide::{self, PideError};
use crate::simulate::{self, Estimate, Horizon, SimConfig, SimError, Strategy};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegimeError {
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Pide(#[from] PideError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Root(#[from] RootError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Pide,
    MonteCarlo,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Pide => "pide",
            Method::MonteCarlo => "monte-carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimePoint {
    pub param: f64,
    pub computed: f64,
    pub limit: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub method: Method,
    /// Standard error of `computed`; zero for deterministic methods.
    pub se: f64,
    /// Admissible `abs_gap`, where the theory provides one.
    pub bound: Option<f64>,
}

impl RegimePoint {
    pub fn new(param: f64, computed: f64, limit: f64, method: Method, se: f64) -> Self {
        let abs_gap = (computed - limit).abs();
        let rel_gap = if limit != 0.0 { abs_gap / limit.abs() } else { abs_gap };
        RegimePoint { param, computed, limit, abs_gap, rel_gap, method, se, bound: None }
    }

    fn from_estimate(param: f64, est: &Estimate, limit: f64) -> Self {
        RegimePoint::new(param, est.mean, limit, Method::MonteCarlo, est.std_error)
    }

    pub fn with_bound(mut self, bound: f64) -> Self {
        self.bound = Some(bound);
        self
    }

    /// Standard error of `rel_gap`.
    pub fn rel_se(&self) -> f64 {
        if self.limit != 0.0 { self.se / self.limit.abs() } else { self.se }
    }

    pub fn within_bound(&self) -> bool {
        self.bound.is_none_or(|b| self.abs_gap <= b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeReport {
    pub name: String,
    pub sweep_param: String,
    pub points: Vec<RegimePoint>,
    /// Named scalars derived from the sweep, such as fitted constants.
    pub notes: Vec<(String, f64)>,
}

impl RegimeReport {
    fn new(name: &str, sweep_param: &str, points: Vec<RegimePoint>) -> Self {
        RegimeReport { name: name.into(), sweep_param: sweep_param.into(), points, notes: Vec::new() }
    }

    pub fn note(&self, key: &str) -> Option<f64> {
        self.notes.iter().find(|(k, _)| k == key).map(|&(_, v)| v)
    }

    pub fn rel_gaps(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rel_gap).collect()
    }

    pub fn last(&self) -> &RegimePoint {
        self.points.last().expect("nonempty sweep")
    }

    /// Whether `rel_gap` is nonincreasing over the final `k` points, each step
    /// allowed `n_se` standard errors of slack.
    pub fn decreasing_tail(&self, k: usize, n_se: f64) -> bool {
        let start = self.points.len().saturating_sub(k);
        self.points[start..].windows(2).all(|w| {
            w[1].rel_gap <= w[0].rel_gap + n_se * (w[0].rel_se() + w[1].rel_se())
        })
    }

    pub fn decreasing(&self, n_se: f64) -> bool {
        self.decreasing_tail(self.points.len(), n_se)
    }

    pub fn sweep_is_monotone(&self) -> bool {
        let p: Vec<f64> = self.points.iter().map(|p| p.param).collect();
        p.windows(2).all(|w| w[1] > w[0]) || p.windows(2).all(|w| w[1] < w[0])
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("sweep_param,computed,limit,abs_gap,rel_gap,method,se\n");
        for p in &self.points {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                format_real(p.param),
                format_real(p.computed),
                format_real(p.limit),
                format_real(p.abs_gap),
                format_real(p.rel_gap),
                p.method.as_str(),
                format_real(p.se)
            )
            .unwrap();
        }
        s
    }
}

/// `n` points `start, start*factor, ...`.
pub fn geometric_sweep(start: f64, factor: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start * factor.powi(i as i32)).collect()
}

fn require_sweep(values: &[f64], what: &str) -> Result<(), RegimeError> {
    if values.is_empty() {
        return Err(RegimeError::Invalid(format!("{what}: sweep is empty")));
    }
    let up = values.windows(2).all(|w| w[1] > w[0]);
    let down = values.windows(2).all(|w| w[1] < w[0]);
    if !(up || down) {
        return Err(RegimeError::Invalid(format!("{what}: sweep must be strictly monotone")));
    }
    Ok(())
}

/// Optimal value at `x`: closed form for exponential jumps, otherwise the
/// integro-ODE solver on `n_grid` cells.
pub fn optimal_value(m: &ModelParams, x: f64, n_grid: usize) -> Result<(f64, Method), RegimeError> {
    if m.jumps.exponential_rate().is_some() {
        Ok((ExponentialSolution::new(m)?.value(x)?, Method::ClosedForm))
    } else {
        Ok((pide::solve_barrier(m, n_grid)?.eval(x), Method::Pide))
    }
}

/// Optimal barrier level, from the same source as [`optimal_value`].
pub fn optimal_barrier(m: &ModelParams, n_grid: usize) -> Result<f64, RegimeError> {
    if m.jumps.exponential_rate().is_some() {
        Ok(ExponentialSolution::new(m)?.b)
    } else {
        Ok(pide::solve_barrier(m, n_grid)?.barrier)
    }
}

/// `delta V(x; delta)` against `(lambda E[Y] - rho)(1 - e^{-alpha x})`.
pub fn regime_small_delta(m: &ModelParams, x: f64, deltas: &[f64], n_grid: usize) -> Result<RegimeReport, RegimeError> {
    require_sweep(deltas, "deltas")?;
    let alpha = lundberg::solve_alpha(m)?.value;
    let limit = m.net_drift() * (1.0 - (-alpha * x).exp());
    let points = deltas
        .par_iter()
        .map(|&d| {
            let (v, method) = optimal_value(&m.with_delta(d), x, n_grid)?;
            Ok(RegimePoint::new(d, d * v, limit, method, 0.0))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    Ok(RegimeReport::new("small_delta", "delta", points))
}

/// Same limit for the threshold-yield strategy, estimated by simulation.
pub fn regime_small_delta_threshold(
    m: &ModelParams,
    x: f64,
    deltas: &[f64],
    level: f64,
    eps: f64,
    cfg: &SimConfig,
) -> Result<RegimeReport, RegimeError> {
    require_sweep(deltas, "deltas")?;
    let alpha = lundberg::solve_alpha(m)?.value;
    let limit = m.net_drift() * (1.0 - (-alpha * x).exp());
    let s = Strategy::ThresholdYield { level, eps };
    let points = deltas
        .iter()
        .map(|&d| {
            let est = simulate::estimate_value(&m.with_delta(d).with_x0(x), &s, cfg)?.scaled(d);
            Ok(RegimePoint::from_estimate(d, &est, limit))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    Ok(RegimeReport::new("small_delta_threshold", "delta", points))
}

/// Two-term expansion of `E[X_{T∧tau}]` without discounting:
/// `(slope, constant)` with `limit(T) = slope T + constant`.
pub fn large_t_expansion(m: &ModelParams, x: f64) -> Result<(f64, f64), RegimeError> {
    let alpha = lundberg::solve_alpha(m)?.value;
    let survive = (-alpha * x).exp();
    let denom = lundberg::ruin_time_denominator(m, alpha);
    let net = m.net_drift();
    Ok((net * (1.0 - survive), net * survive * x / denom))
}

/// For `delta > 0`, the finite-horizon barrier value (with liquidation at `T`)
/// against the infinite-horizon value, bounded by
/// `(x + lambda E[Y] T) e^{-delta T} + (lambda E[Y] / delta) e^{-delta T}`.
/// For `delta = 0`, the terminal-payout value against [`large_t_expansion`].
pub fn regime_large_t(
    m: &ModelParams,
    x: f64,
    ts: &[f64],
    n_grid: usize,
    cfg: &SimConfig,
) -> Result<RegimeReport, RegimeError> {
    require_sweep(ts, "horizons")?;
    let m = m.with_x0(x);
    let revenue = m.revenue_rate();
    if m.delta > 0.0 {
        let (v_inf, _) = optimal_value(&m, x, n_grid)?;
        let b = optimal_barrier(&m, n_grid)?;
        let points = ts
            .iter()
            .map(|&t| {
                let c = SimConfig { horizon: Horizon::Finite { t }, ..*cfg };
                let est = simulate::estimate_value(&m, &Strategy::Barrier { b }, &c)?;
                let decay = (-m.delta * t).exp();
                let bound = (x + revenue * t) * decay + revenue / m.delta * decay;
                Ok(RegimePoint::from_estimate(t, &est, v_inf).with_bound(bound + 3.0 * est.std_error))
            })
            .collect::<Result<Vec<_>, RegimeError>>()?;
        Ok(RegimeReport::new("large_t", "T", points))
    } else {
        let (slope, constant) = large_t_expansion(&m, x)?;
        let points = ts
            .iter()
            .map(|&t| {
                let c = SimConfig { horizon: Horizon::Finite { t }, ..*cfg };
                let est = simulate::estimate_value(&m, &Strategy::TerminalPayout, &c)?;
                Ok(RegimePoint::from_estimate(t, &est, slope * t + constant))
            })
            .collect::<Result<Vec<_>, RegimeError>>()?;
        let mut report = RegimeReport::new("large_t", "T", points);
        report.notes.push(("slope".into(), slope));
        report.notes.push(("constant".into(), constant));
        // optional stopping gives E[X_{T∧tau}] = x + net E[T∧tau] exactly
        report.notes.push(("constant_with_initial_surplus".into(), x + constant));
        Ok(report)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LargeLambdaCase {
    /// Infinite horizon, `delta > 0`: `V / lambda -> E[Y] / delta`.
    Discounted,
    /// Finite horizon, `delta > 0`: `V / lambda -> (E[Y] / delta)(1 - e^{-delta T})`.
    FiniteDiscounted,
    /// Finite horizon, `delta = 0`: `V / lambda -> E[Y] T`.
    FiniteUndiscounted,
}

impl LargeLambdaCase {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "i" | "1" => Some(LargeLambdaCase::Discounted),
            "ii" | "2" => Some(LargeLambdaCase::FiniteDiscounted),
            "iii" | "3" => Some(LargeLambdaCase::FiniteUndiscounted),
            _ => None,
        }
    }
}

/// `V(x; lambda) / lambda` against the large-intensity limit. The finite
/// cases simulate the optimal barrier with liquidation at `T` (`delta > 0`) or
/// the terminal payout (`delta = 0`).
pub fn regime_large_lambda(
    m: &ModelParams,
    x: f64,
    lambdas: &[f64],
    case: LargeLambdaCase,
    n_grid: usize,
    cfg: &SimConfig,
) -> Result<RegimeReport, RegimeError> {
    require_sweep(lambdas, "lambdas")?;
    let mean = m.jumps.mean();
    let finite_t = || match cfg.horizon {
        Horizon::Finite { t } => Ok(t),
        _ => Err(RegimeError::Invalid("finite large-lambda cases need a finite horizon".into())),
    };
    let points = match case {
        LargeLambdaCase::Discounted => {
            if m.delta <= 0.0 {
                return Err(RegimeError::Invalid("case i needs delta > 0".into()));
            }
            lambdas
                .par_iter()
                .map(|&l| {
                    let (v, method) = optimal_value(&m.with_lambda(l), x, n_grid)?;
                    Ok(RegimePoint::new(l, v / l, mean / m.delta, method, 0.0))
                })
                .collect::<Result<Vec<_>, RegimeError>>()?
        }
        LargeLambdaCase::FiniteDiscounted => {
            if m.delta <= 0.0 {
                return Err(RegimeError::Invalid("case ii needs delta > 0".into()));
            }
            let t = finite_t()?;
            let limit = mean / m.delta * (1.0 - (-m.delta * t).exp());
            lambdas
                .iter()
                .map(|&l| {
                    let ml = m.with_lambda(l).with_x0(x);
                    let b = optimal_barrier(&ml, n_grid)?;
                    let est = simulate::estimate_value(&ml, &Strategy::Barrier { b }, cfg)?.scaled(1.0 / l);
                    Ok(RegimePoint::from_estimate(l, &est, limit))
                })
                .collect::<Result<Vec<_>, RegimeError>>()?
        }
        LargeLambdaCase::FiniteUndiscounted => {
            let t = finite_t()?;
            let m0 = m.with_delta(0.0);
            lambdas
                .iter()
                .map(|&l| {
                    let ml = m0.with_lambda(l).with_x0(x);
                    let est = simulate::estimate_value(&ml, &Strategy::TerminalPayout, cfg)?.scaled(1.0 / l);
                    Ok(RegimePoint::from_estimate(l, &est, mean * t))
                })
                .collect::<Result<Vec<_>, RegimeError>>()?
        }
    };
    Ok(RegimeReport::new("large_lambda", "lambda", points))
}

/// Threshold-yield value divided by `lambda` against `E[Y] / delta`.
pub fn regime_large_lambda_threshold(
    m: &ModelParams,
    x: f64,
    lambdas: &[f64],
    level: f64,
    eps: f64,
    cfg: &SimConfig,
) -> Result<RegimeReport, RegimeError> {
    require_sweep(lambdas, "lambdas")?;
    if m.delta <= 0.0 {
        return Err(RegimeError::Invalid("threshold sweep needs delta > 0".into()));
    }
    let limit = m.jumps.mean() / m.delta;
    let s = Strategy::ThresholdYield { level, eps };
    let points = lambdas
        .iter()
        .map(|&l| {
            let est = simulate::estimate_value(&m.with_lambda(l).with_x0(x), &s, cfg)?.scaled(1.0 / l);
            Ok(RegimePoint::from_estimate(l, &est, limit))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    Ok(RegimeReport::new("large_lambda_threshold", "lambda", points))
}

/// Reserve used to approximate paying everything at once.
pub const VANISHING_RESERVE: f64 = 1e-9;

/// Exact values at `rho = 0` for the three horizons, against simulation of
/// the pay-all-excess strategy with a vanishing reserve. Rows are indexed by
/// case number 1, 2, 3; cases 2 and 3 use horizon `t`, case 3 sets `delta = 0`.
pub fn regime_small_rho_exact(m: &ModelParams, x: f64, t: f64, cfg: &SimConfig) -> Result<RegimeReport, RegimeError> {
    if m.delta <= 0.0 {
        return Err(RegimeError::Invalid("small-rho cases need delta > 0 in the template".into()));
    }
    let m0 = m.with_rho(0.0).with_x0(x);
    let revenue = m0.revenue_rate();
    let s = Strategy::PayAllExcess { eps: VANISHING_RESERVE };
    let cases = [
        (m0.clone(), Horizon::infinite(), x + revenue / m0.delta),
        (m0.clone(), Horizon::Finite { t }, x + revenue / m0.delta * (1.0 - (-m0.delta * t).exp())),
        (m0.with_delta(0.0), Horizon::Finite { t }, x + revenue * t),
    ];
    let points = cases
        .iter()
        .enumerate()
        .map(|(i, (mc, horizon, limit))| {
            let c = SimConfig { horizon: *horizon, ..*cfg };
            let est = simulate::estimate_value(mc, &s, &c)?;
            Ok(RegimePoint::from_estimate((i + 1) as f64, &est, *limit))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    Ok(RegimeReport::new("small_rho", "case", points))
}

/// Exponential jumps: `V(x; rho) - x - lambda / (nu delta)` against
/// `rho log(rho) / (lambda + delta)`. The ratio of the two is recorded per
/// point in the `ratio@<rho>` notes.
pub fn regime_small_rho(m: &ModelParams, x: f64, rhos: &[f64]) -> Result<RegimeReport, RegimeError> {
    require_sweep(rhos, "rhos")?;
    let nu = m.jumps.exponential_rate().ok_or(ClosedFormError::NotExponential)?;
    let zeroth = x + m.lambda / (nu * m.delta);
    let points = rhos
        .iter()
        .map(|&rho| {
            let v = ExponentialSolution::new(&m.with_rho(rho))?.value(x)?;
            let target = rho * rho.ln() / (m.lambda + m.delta);
            Ok(RegimePoint::new(rho, v - zeroth, target, Method::ClosedForm, 0.0))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    let mut report = RegimeReport::new("small_rho", "rho", points);
    report.notes = report.points.iter().map(|p| (format!("ratio@{}", p.param), p.computed / p.limit)).collect();
    Ok(report)
}

/// Second-order coefficient `lambda/nu - rho - rho log(lambda / (nu rho))`
/// of `V(x; delta) - x` in `1/delta`, for exponential jumps.
pub fn large_delta_coefficient(m: &ModelParams) -> Result<f64, RegimeError> {
    let nu = m.jumps.exponential_rate().ok_or(ClosedFormError::NotExponential)?;
    let revenue = m.lambda / nu;
    Ok(revenue - m.rho - m.rho * (revenue / m.rho).ln())
}

/// `V(x; delta)` against `x`, refined to `x + c / delta` for exponential jumps.
pub fn regime_large_delta(m: &ModelParams, x: f64, deltas: &[f64], n_grid: usize) -> Result<RegimeReport, RegimeError> {
    require_sweep(deltas, "deltas")?;
    let coefficient = large_delta_coefficient(m).ok();
    let points = deltas
        .par_iter()
        .map(|&d| {
            let (v, method) = optimal_value(&m.with_delta(d), x, n_grid)?;
            let limit = x + coefficient.map_or(0.0, |c| c / d);
            Ok(RegimePoint::new(d, v, limit, method, 0.0))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    let mut report = RegimeReport::new("large_delta", "delta", points);
    if let Some(c) = coefficient {
        report.notes.push(("second_order_coefficient".into(), c));
    }
    Ok(report)
}

/// Slope `(V(x; T) - x) / T` of the pay-all-excess strategy with reserve
/// `2 rho T` (so no ruin before `T`) against `lambda E[Y] - rho`.
///
/// The fitted constant `C` of the residual `slope - limit ≈ C T` is recorded
/// in the notes, and each point's bound is `|C| T + 3 SE`.
pub fn regime_small_t(m: &ModelParams, x: f64, ts: &[f64], cfg: &SimConfig) -> Result<RegimeReport, RegimeError> {
    require_sweep(ts, "horizons")?;
    if !m.is_profitable() {
        return Err(RegimeError::Invalid(format!(
            "small-T regime needs lambda*E[Y] > rho (net drift {})",
            m.net_drift()
        )));
    }
    if let Some(&t) = ts.iter().find(|&&t| !(t > 0.0 && m.rho * t < x)) {
        return Err(RegimeError::Invalid(format!("horizon T = {t} must satisfy 0 < T < x/rho = {}", x / m.rho)));
    }
    let m = m.with_x0(x);
    let limit = m.net_drift();
    let mut points = ts
        .iter()
        .map(|&t| {
            let reserve = if m.rho > 0.0 { (2.0 * m.rho * t).min(x) } else { VANISHING_RESERVE.min(x) };
            let c = SimConfig { horizon: Horizon::Finite { t }, ..*cfg };
            let est = simulate::estimate_value(&m, &Strategy::PayAllExcess { eps: reserve }, &c)?;
            let slope = Estimate { mean: (est.mean - x) / t, std_error: est.std_error / t, n: est.n };
            Ok(RegimePoint::from_estimate(t, &slope, limit))
        })
        .collect::<Result<Vec<_>, RegimeError>>()?;
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(n, d), p| (n + (p.computed - p.limit) * p.param, d + p.param * p.param));
    let fitted = num / den;
    for p in &mut points {
        p.bound = Some(fitted.abs() * p.param + 3.0 * p.se);
    }
    let mut report = RegimeReport::new("small_t", "T", points);
    report.notes.push(("fitted_C".into(), fitted));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NearOptimality {
    pub optimal: f64,
    pub achieved: Estimate,
    pub gap: f64,
}

/// Optimal value minus the simulated threshold-yield value. The optimum comes
/// from [`optimal_value`], or from simulating the terminal payout when
/// `delta = 0` on a finite horizon.
pub fn near_optimality_gap(
    m: &ModelParams,
    x: f64,
    level: f64,
    eps: f64,
    n_grid: usize,
    cfg: &SimConfig,
) -> Result<NearOptimality, RegimeError> {
    let m = m.with_x0(x);
    let optimal = match cfg.horizon {
        Horizon::Finite { .. } if m.delta == 0.0 => {
            simulate::estimate_value(&m, &Strategy::TerminalPayout, cfg)?.mean
        }
        _ => optimal_value(&m, x, n_grid)?.0,
    };
    let achieved = simulate::estimate_value(&m, &Strategy::ThresholdYield { level, eps }, cfg)?;
    Ok(NearOptimality { optimal, achieved, gap: optimal - achieved.mean })
}
