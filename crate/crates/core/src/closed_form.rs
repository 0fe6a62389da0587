//! Exact value function and optimal barrier for exponential jumps.

use serde::Serialize;
use thiserror::Error;

use crate::lundberg::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClosedFormError {
    #[error("closed form requires exponential jumps")]
    NotExponential,
    #[error("closed form requires rho > 0 (got {0})")]
    NoCost(f64),
    #[error("closed form requires delta > 0 (got {0})")]
    NoDiscount(f64),
    #[error("closed form requires lambda*E[Y] > rho (net drift {0})")]
    NotProfitable(f64),
    #[error("surplus must be >= 0 (got {0})")]
    NegativeSurplus(f64),
}

/// Below this discount the denominator uses the single-term form implied by
/// the barrier equation.
const SMALL_DELTA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialSolution {
    pub r: f64,
    pub s: f64,
    pub b: f64,
    pub v_at_b: f64,
    #[serde(skip)]
    nu: f64,
    #[serde(skip)]
    lambda: f64,
    /// `rho r + delta` and `rho s + delta`, computed without cancellation.
    #[serde(skip)]
    wr: f64,
    #[serde(skip)]
    ws: f64,
    #[serde(skip)]
    denominator: f64,
}

/// Roots `(lo, hi)` of `z^2 + p z + q` with `q < 0`, avoiding cancellation.
fn split_roots(p: f64, q: f64) -> (f64, f64) {
    let disc = (p * p - 4.0 * q).sqrt();
    if p >= 0.0 {
        let lo = -(p + disc) / 2.0;
        (lo, q / lo)
    } else {
        let hi = (-p + disc) / 2.0;
        (q / hi, hi)
    }
}

/// `(r, s)`, the roots of `rho xi^2 + (lambda + delta - nu rho) xi - nu delta = 0`, `r < 0 < s`.
pub fn solve_rs(m: &ModelParams) -> Result<(f64, f64), ClosedFormError> {
    let nu = check(m)?;
    Ok(roots(m, nu))
}

fn roots(m: &ModelParams, nu: f64) -> (f64, f64) {
    let p = (m.lambda + m.delta - nu * m.rho) / m.rho;
    let q = -nu * m.delta / m.rho;
    split_roots(p, q)
}

fn check(m: &ModelParams) -> Result<f64, ClosedFormError> {
    let nu = m.jumps.exponential_rate().ok_or(ClosedFormError::NotExponential)?;
    if m.rho <= 0.0 {
        return Err(ClosedFormError::NoCost(m.rho));
    }
    if m.delta <= 0.0 {
        return Err(ClosedFormError::NoDiscount(m.delta));
    }
    if !m.is_profitable() {
        return Err(ClosedFormError::NotProfitable(m.net_drift()));
    }
    Ok(nu)
}

pub fn optimal_barrier(m: &ModelParams) -> Result<f64, ClosedFormError> {
    Ok(ExponentialSolution::new(m)?.b)
}

pub fn value(m: &ModelParams, x: f64) -> Result<f64, ClosedFormError> {
    ExponentialSolution::new(m)?.value(x)
}

impl ExponentialSolution {
    pub fn new(m: &ModelParams) -> Result<Self, ClosedFormError> {
        let nu = check(m)?;
        let (r, s) = roots(m, nu);
        // w = rho xi + delta solves w^2 + (lambda - delta - nu rho) w - delta lambda = 0
        let (wr, ws) = split_roots(m.lambda - m.delta - nu * m.rho, -m.delta * m.lambda);
        let arg = (s / r) * (ws / wr);
        let b = (arg.ln() / (r - s)).max(0.0);
        let denominator = if m.delta < SMALL_DELTA {
            (1.0 - r / s) * wr * (r * b).exp()
        } else {
            wr * (r * b).exp() - ws * (s * b).exp()
        };
        Ok(ExponentialSolution {
            r,
            s,
            b,
            v_at_b: (m.lambda / nu - m.rho) / m.delta,
            nu,
            lambda: m.lambda,
            wr,
            ws,
            denominator,
        })
    }

    /// `rho r + delta`, `rho s + delta`.
    pub fn shifted_roots(&self) -> (f64, f64) {
        (self.wr, self.ws)
    }

    /// The two-exponential branch valid on `[0, b]`, evaluated anywhere.
    pub fn barrier_branch(&self, x: f64) -> f64 {
        self.lambda / self.nu * ((self.r * x).exp() - (self.s * x).exp()) / self.denominator
    }

    pub fn barrier_branch_derivative(&self, x: f64) -> f64 {
        self.lambda / self.nu * (self.r * (self.r * x).exp() - self.s * (self.s * x).exp())
            / self.denominator
    }

    pub fn value(&self, x: f64) -> Result<f64, ClosedFormError> {
        if !(x >= 0.0) {
            return Err(ClosedFormError::NegativeSurplus(x));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if x <= self.b {
            Ok(self.barrier_branch(x))
        } else {
            Ok(self.v_at_b + x - self.b)
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64, ClosedFormError> {
        if !(x >= 0.0) {
            return Err(ClosedFormError::NegativeSurplus(x));
        }
        if x <= self.b && self.b > 0.0 {
            Ok(self.barrier_branch_derivative(x))
        } else {
            Ok(1.0)
        }
    }
}
