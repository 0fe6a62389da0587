//! Value function and optimal barrier for general jump laws.
//!
//! Below the barrier the value solves
//!
//! ```text
//! rho V'(x) = -(lambda + delta) V(x) + lambda ∫_0^{b-x} V(x+y) p(y) dy
//!             + lambda (E[(Y-(b-x))^+] + V(b) P(Y > b-x))
//! ```
//!
//! with `V(b) = (lambda E[Y] - rho) / delta`. The right side only references
//! `V` on `[x, b]`, so the ODE is integrated backward from the barrier with an
//! explicit midpoint scheme, and the barrier is found by shooting on `V(0) = 0`.

use serde::Serialize;
use thiserror::Error;

use crate::lundberg::ModelParams;

pub const DEFAULT_GRID: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PideError {
    #[error("integro-ODE solver requires rho > 0 (got {0}); use the closed formulas for rho = 0")]
    NoCost(f64),
    #[error("barrier value requires delta > 0 (got {0})")]
    NoDiscount(f64),
    #[error("solver requires lambda*E[Y] > rho (net drift {0})")]
    NotProfitable(f64),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("barrier shooting failed: {0}")]
    SolverFailure(String),
}

/// `V(b) = (lambda E[Y] - rho) / delta`, forced by smooth fit at the barrier.
pub fn barrier_value(m: &ModelParams) -> Result<f64, PideError> {
    if m.delta <= 0.0 {
        return Err(PideError::NoDiscount(m.delta));
    }
    Ok(m.net_drift() / m.delta)
}

fn check(m: &ModelParams) -> Result<f64, PideError> {
    if m.rho <= 0.0 {
        return Err(PideError::NoCost(m.rho));
    }
    if !m.is_profitable() {
        return Err(PideError::NotProfitable(m.net_drift()));
    }
    barrier_value(m)
}

/// Jump contribution from sizes overshooting the barrier, paid out at unit slope.
fn tail_term(m: &ModelParams, gap: f64, v_at_b: f64) -> f64 {
    let gap = gap.max(0.0);
    let d = &m.jumps;
    m.lambda * (d.mean_excess_integral(gap).unwrap_or(0.0) + v_at_b * d.survival(gap).unwrap_or(0.0))
}

/// `V'(x)` from values of `V` on a uniform grid of `[x, b]`.
///
/// `values[0] = V(x)` and `values[last] = V(b)`; the convolution term uses the
/// composite trapezoid rule on those nodes.
pub fn rhs_derivative(m: &ModelParams, b: f64, x: f64, values: &[f64]) -> Result<f64, PideError> {
    let v_at_b = check(m)?;
    if !(0.0 <= x && x <= b) {
        return Err(PideError::InvalidGrid(format!("need 0 <= x <= b (x = {x}, b = {b})")));
    }
    if values.is_empty() || (values.len() == 1 && x < b) {
        return Err(PideError::InvalidGrid("need values spanning [x, b]".into()));
    }
    let q = if values.len() == 1 {
        0.0
    } else {
        let h = (b - x) / (values.len() - 1) as f64;
        let last = values.len() - 1;
        let mut acc = 0.0;
        for (k, v) in values.iter().enumerate() {
            let w = if k == 0 || k == last { 0.5 } else { 1.0 };
            acc += w * v * m.jumps.density(k as f64 * h);
        }
        acc * h
    };
    let v = values[0];
    Ok((-(m.lambda + m.delta) * v + m.lambda * q + tail_term(m, b - x, v_at_b)) / m.rho)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub barrier: f64,
}

impl ValueFunction {
    pub fn n(&self) -> usize {
        self.grid.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.barrier / self.n() as f64
    }

    pub fn value_at_barrier(&self) -> f64 {
        *self.values.last().expect("nonempty grid")
    }

    /// Linear interpolation on `[0, b]`, unit slope above.
    pub fn eval(&self, x: f64) -> f64 {
        if x >= self.barrier {
            return self.value_at_barrier() + x - self.barrier;
        }
        if x <= 0.0 {
            return self.values[0];
        }
        let h = self.step();
        let i = ((x / h) as usize).min(self.n() - 1);
        let t = (x - self.grid[i]) / h;
        self.values[i] * (1.0 - t) + self.values[i + 1] * t
    }

    /// Second-order one-sided difference at the barrier.
    pub fn slope_at_barrier(&self) -> f64 {
        let n = self.n();
        let h = self.step();
        if n < 2 {
            return (self.values[n] - self.values[n - 1]) / h;
        }
        (3.0 * self.values[n] - 4.0 * self.values[n - 1] + self.values[n - 2]) / (2.0 * h)
    }

    pub fn min_slope(&self) -> f64 {
        let h = self.step();
        self.values.windows(2).map(|w| (w[1] - w[0]) / h).fold(f64::INFINITY, f64::min)
    }

    /// Left side of the integro-ODE at interior nodes, with central differences
    /// for `V'` and trapezoid quadrature for the convolution.
    pub fn hjb_residuals(&self, m: &ModelParams) -> Vec<f64> {
        let n = self.n();
        let h = self.step();
        let v_at_b = self.value_at_barrier();
        let kernel: Vec<f64> = (0..=n).map(|k| m.jumps.density(k as f64 * h)).collect();
        (1..n)
            .map(|i| {
                let dv = (self.values[i + 1] - self.values[i - 1]) / (2.0 * h);
                let q = trapezoid_from(&self.values, &kernel, i, h);
                -m.rho * dv - (m.lambda + m.delta) * self.values[i]
                    + m.lambda * q
                    + tail_term(m, self.barrier - self.grid[i], v_at_b)
            })
            .collect()
    }
}

/// `h * trapezoid(V_j p(x_j - x_i), j = i..=n)` on the uniform grid.
fn trapezoid_from(values: &[f64], kernel: &[f64], i: usize, h: f64) -> f64 {
    let n = values.len() - 1;
    if i == n {
        return 0.0;
    }
    let mut acc = 0.5 * (kernel[0] * values[i] + kernel[n - i] * values[n]);
    for j in i + 1..n {
        acc += kernel[j - i] * values[j];
    }
    acc * h
}

struct Integrator<'a> {
    m: &'a ModelParams,
    v_at_b: f64,
    h: f64,
    /// `p(k h)`
    kernel: Vec<f64>,
    /// `p((k + 1/2) h)`
    half_kernel: Vec<f64>,
    /// tail terms at nodes and at cell midpoints
    node_tail: Vec<f64>,
    mid_tail: Vec<f64>,
}

impl<'a> Integrator<'a> {
    fn new(m: &'a ModelParams, v_at_b: f64, b: f64, n: usize) -> Self {
        let h = b / n as f64;
        let d = &m.jumps;
        Integrator {
            m,
            v_at_b,
            h,
            kernel: (0..=n).map(|k| d.density(k as f64 * h)).collect(),
            half_kernel: (0..n).map(|k| d.density((k as f64 + 0.5) * h)).collect(),
            node_tail: (0..=n).map(|i| tail_term(m, b - i as f64 * h, v_at_b)).collect(),
            mid_tail: (0..n).map(|i| tail_term(m, b - (i as f64 + 0.5) * h, v_at_b)).collect(),
        }
    }

    fn slope(&self, v: f64, q: f64, tail: f64) -> f64 {
        (-(self.m.lambda + self.m.delta) * v + self.m.lambda * q + tail) / self.m.rho
    }

    /// `V'` at node `i`; needs `values[i..]`.
    fn node_slope(&self, values: &[f64], i: usize) -> f64 {
        let q = trapezoid_from(values, &self.kernel, i, self.h);
        self.slope(values[i], q, self.node_tail[i])
    }

    /// `V'` at `x_i + h/2` given the predicted midpoint value; needs `values[i+1..]`.
    fn mid_slope(&self, values: &[f64], i: usize, v_mid: f64) -> f64 {
        let n = values.len() - 1;
        let h = self.h;
        let hk = &self.half_kernel;
        // half cell [x_i + h/2, x_{i+1}]
        let mut q = 0.25 * h * (self.kernel[0] * v_mid + hk[0] * values[i + 1]);
        if i + 1 < n {
            let mut acc = 0.5 * (hk[0] * values[i + 1] + hk[n - i - 1] * values[n]);
            for j in i + 2..n {
                acc += hk[j - i - 1] * values[j];
            }
            q += acc * h;
        }
        self.slope(v_mid, q, self.mid_tail[i])
    }

    fn run(&self, n: usize) -> Vec<f64> {
        let mut values = vec![0.0; n + 1];
        values[n] = self.v_at_b;
        for i in (0..n).rev() {
            let k1 = self.node_slope(&values, i + 1);
            let v_mid = values[i + 1] - 0.5 * self.h * k1;
            let k2 = self.mid_slope(&values, i, v_mid);
            values[i] = values[i + 1] - self.h * k2;
        }
        values
    }
}

/// Integrates backward from a candidate barrier `b` on a uniform `n`-cell grid.
pub fn integrate_backward(m: &ModelParams, b: f64, n: usize) -> Result<ValueFunction, PideError> {
    let v_at_b = check(m)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(PideError::InvalidGrid(format!("barrier must be > 0 (got {b})")));
    }
    if n < 2 {
        return Err(PideError::InvalidGrid(format!("need at least 2 cells (got {n})")));
    }
    let values = Integrator::new(m, v_at_b, b, n).run(n);
    let h = b / n as f64;
    let grid = (0..=n).map(|i| if i == n { b } else { i as f64 * h }).collect();
    Ok(ValueFunction { grid, values, barrier: b })
}

/// Shooting residual `V(0; b)`.
pub fn shooting_residual(m: &ModelParams, b: f64, n: usize) -> Result<f64, PideError> {
    Ok(integrate_backward(m, b, n)?.values[0])
}

const SHOOT_LO: f64 = 1e-6;
const SHOOT_CAP_DOUBLINGS: u32 = 30;
const SHOOT_REL_TOL: f64 = 1e-8;

/// Optimal barrier by bisection on `V(0; b) = 0`.
pub fn solve_barrier(m: &ModelParams, n: usize) -> Result<ValueFunction, PideError> {
    check(m)?;
    let g = |b: f64| -> Result<f64, PideError> {
        let v0 = shooting_residual(m, b, n)?;
        // overflow from an absurd candidate counts as overshooting
        Ok(if v0.is_finite() { v0 } else { f64::NEG_INFINITY })
    };
    let mut lo = SHOOT_LO;
    let g_lo = g(lo)?;
    if g_lo <= 0.0 {
        return Err(PideError::SolverFailure(format!(
            "V(0; b={lo}) = {g_lo} is not positive; no sign change at the lower bracket"
        )));
    }
    let mean = m.jumps.mean();
    let mut hi = mean;
    let mut doublings = 0;
    let mut g_hi = g(hi)?;
    while g_hi > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > SHOOT_CAP_DOUBLINGS {
            return Err(PideError::SolverFailure(format!(
                "V(0; b) still positive at b = {hi} (2^{SHOOT_CAP_DOUBLINGS} * E[Y]); last residual {g_hi}"
            )));
        }
        g_hi = g(hi)?;
    }
    while hi - lo > SHOOT_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    integrate_backward(m, 0.5 * (lo + hi), n)
}
