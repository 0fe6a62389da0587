//! Model parameters and the exponent equations of the uncontrolled surplus.
//!
//! Every exponent here is the positive root of
//! `drift * a + lambda * (laplace(a) - 1) - theta = 0`
//! for some effective downward drift and discount `theta`. The left side is
//! convex in `a`, negative just right of zero whenever a positive root exists,
//! and tends to `+inf`, so bracketing by doubling always terminates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::JumpDistribution;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError {
    #[error("no positive root: {0}")]
    NoPositiveRoot(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// Parameters of the controlled surplus `dX = -rho dt - dD + dJ`, `X_0 = x0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub rho: f64,
    pub lambda: f64,
    pub delta: f64,
    pub jumps: JumpDistribution,
    #[serde(default = "unit_surplus")]
    pub x0: f64,
}

fn unit_surplus() -> f64 {
    1.0
}

impl ModelParams {
    pub fn new(
        rho: f64,
        lambda: f64,
        delta: f64,
        jumps: JumpDistribution,
        x0: f64,
    ) -> Result<Self, ModelError> {
        let m = ModelParams { rho, lambda, delta, jumps, x0 };
        m.validate()?;
        Ok(m)
    }

    /// Cost rate 1, intensity 2, discount 0.1, unit exponential jumps, start at 1.
    pub fn canonical() -> Self {
        ModelParams {
            rho: 1.0,
            lambda: 2.0,
            delta: 0.1,
            jumps: JumpDistribution::Exponential { nu: 1.0 },
            x0: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |field, message: String| Err(ModelError::Invalid { field, message });
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad("rho", format!("must be finite and >= 0 (got {})", self.rho));
        }
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return bad("lambda", format!("must be finite and > 0 (got {})", self.lambda));
        }
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return bad("delta", format!("must be finite and >= 0 (got {})", self.delta));
        }
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return bad("x0", format!("must be finite and > 0 (got {})", self.x0));
        }
        Ok(())
    }

    pub fn with_rho(&self, rho: f64) -> Self {
        ModelParams { rho, ..self.clone() }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        ModelParams { lambda, ..self.clone() }
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        ModelParams { delta, ..self.clone() }
    }

    pub fn with_x0(&self, x0: f64) -> Self {
        ModelParams { x0, ..self.clone() }
    }

    /// `lambda * E[Y]`, the revenue rate.
    pub fn revenue_rate(&self) -> f64 {
        self.lambda * self.jumps.mean()
    }

    /// `lambda * E[Y] - rho`.
    pub fn net_drift(&self) -> f64 {
        self.revenue_rate() - self.rho
    }

    pub fn is_profitable(&self) -> bool {
        self.net_drift() > 0.0
    }

    /// Constant yield paid by the threshold-yield strategy, `(1 - eps) * net_drift`.
    pub fn yield_rate(&self, eps: f64) -> f64 {
        (1.0 - eps) * self.net_drift()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootResult {
    pub value: f64,
    pub residual: f64,
    pub iterations: u32,
}

const LOWER_BRACKET: f64 = 1e-12;
const UPPER_CAP: f64 = 1.152_921_504_606_847e18; // 2^60
const BISECTION_WIDTH: f64 = 1e-10;
const NEWTON_STEPS: u32 = 5;

/// Positive root of `drift * a + lambda * (laplace(a) - 1) - theta`.
pub fn solve_drift_exponent(
    m: &ModelParams,
    drift: f64,
    theta: f64,
) -> Result<RootResult, RootError> {
    if !(drift.is_finite() && drift >= 0.0) {
        return Err(RootError::Precondition(format!("drift must be >= 0 (got {drift})")));
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(RootError::Precondition(format!("theta must be >= 0 (got {theta})")));
    }
    if drift == 0.0 {
        return Err(RootError::NoPositiveRoot(
            "zero downward drift: the exponent equation has no positive root".into(),
        ));
    }
    let revenue = m.revenue_rate();
    if theta == 0.0 && drift >= revenue {
        return Err(RootError::NoPositiveRoot(format!(
            "drift {drift} >= lambda*E[Y] = {revenue}: ruin is certain"
        )));
    }
    let d = &m.jumps;
    let lambda = m.lambda;
    let f = |a: f64| drift * a + lambda * (d.laplace_unchecked(a) - 1.0) - theta;
    let df = |a: f64| drift - lambda * d.laplace_weighted_mean_unchecked(a);

    let mut lo = LOWER_BRACKET;
    if f(lo) >= 0.0 {
        // root below the lower bracket (vanishing theta or drift at the edge)
        return Err(RootError::NoPositiveRoot(format!(
            "exponent function is already nonnegative at {LOWER_BRACKET}"
        )));
    }
    let mut hi: f64 = 1.0;
    let mut iterations = 0u32;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        iterations += 1;
        if hi > UPPER_CAP {
            return Err(RootError::NoPositiveRoot("upper bracket exceeded 2^60".into()));
        }
    }
    while hi - lo > BISECTION_WIDTH * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let mut best = 0.5 * (lo + hi);
    let mut best_res = f(best);
    let mut a = best;
    for _ in 0..NEWTON_STEPS {
        let slope = df(a);
        if slope <= 0.0 || !slope.is_finite() {
            break;
        }
        let next = a - f(a) / slope;
        iterations += 1;
        if !(next > 0.0 && next.is_finite()) {
            break;
        }
        a = next;
        let r = f(a);
        if r.abs() < best_res.abs() {
            best = a;
            best_res = r;
        }
        if r == 0.0 {
            break;
        }
    }
    Ok(RootResult { value: best, residual: best_res, iterations })
}

fn require_cost(m: &ModelParams) -> Result<(), RootError> {
    if m.rho <= 0.0 {
        return Err(RootError::NoPositiveRoot("rho = 0: the surplus never decreases".into()));
    }
    Ok(())
}

/// Ruin exponent: `P_x(ruin) = exp(-alpha x)`.
pub fn solve_alpha(m: &ModelParams) -> Result<RootResult, RootError> {
    require_cost(m)?;
    solve_drift_exponent(m, m.rho, 0.0)
}

/// Laplace exponent of the ruin time: `E_x[exp(-theta tau)] = exp(-beta x)`.
pub fn solve_beta(m: &ModelParams, theta: f64) -> Result<RootResult, RootError> {
    require_cost(m)?;
    solve_drift_exponent(m, m.rho, theta)
}

/// Ruin exponent of the surplus once the constant yield `(1 - eps) * net_drift` is paid.
pub fn solve_alpha_tilted(m: &ModelParams, eps: f64) -> Result<RootResult, RootError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(RootError::Precondition(format!("eps must lie in (0, 1] (got {eps})")));
    }
    if !m.is_profitable() {
        return Err(RootError::NoPositiveRoot(format!(
            "net drift {} is not positive",
            m.net_drift()
        )));
    }
    solve_drift_exponent(m, m.rho + m.yield_rate(eps), 0.0)
}

/// `rho - lambda * E[Y exp(-alpha Y)]`, the denominator of the mean ruin time.
pub fn ruin_time_denominator(m: &ModelParams, alpha: f64) -> f64 {
    m.rho - m.lambda * m.jumps.laplace_weighted_mean_unchecked(alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanRuinTime {
    /// `E_x[tau 1{tau < inf}]`
    pub defective_mean: f64,
    /// `E_x[tau | tau < inf]`
    pub conditional_mean: f64,
}

pub fn defective_mean_ruin_time(m: &ModelParams, x: f64) -> Result<MeanRuinTime, RootError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(RootError::Precondition(format!("x must be >= 0 (got {x})")));
    }
    if !m.is_profitable() {
        return Err(RootError::Precondition(format!(
            "requires lambda*E[Y] > rho (net drift {})",
            m.net_drift()
        )));
    }
    let alpha = solve_alpha(m)?.value;
    let denom = ruin_time_denominator(m, alpha);
    assert!(denom > 0.0, "mean ruin time denominator must be positive, got {denom}");
    let conditional_mean = x / denom;
    Ok(MeanRuinTime { defective_mean: conditional_mean * (-alpha * x).exp(), conditional_mean })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rho: f64, lambda: f64, d: JumpDistribution) -> ModelParams {
        ModelParams::new(rho, lambda, 0.1, d, 1.0).unwrap()
    }

    fn exp(nu: f64) -> JumpDistribution {
        JumpDistribution::exponential(nu).unwrap()
    }

    fn mix() -> JumpDistribution {
        JumpDistribution::mixture(vec![0.5, 0.5], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn alpha_exponential_closed_form() {
        let r = solve_alpha(&model(1.0, 2.0, exp(1.0))).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
        assert!(r.residual.abs() < 1e-12);
        let r = solve_alpha(&model(1.0, 4.0, exp(2.0))).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn alpha_mixture() {
        // alpha (alpha^2 + alpha - 1) = 0 after clearing denominators
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        let r = solve_alpha(&model(1.0, 2.0, mix())).unwrap();
        assert!((r.value - golden).abs() < 1e-12, "{}", r.value);
        assert!(r.residual.abs() < 1e-12);
    }

    #[test]
    fn alpha_errors() {
        assert!(matches!(
            solve_alpha(&model(2.0, 2.0, exp(1.0))),
            Err(RootError::NoPositiveRoot(_))
        ));
        assert!(matches!(
            solve_alpha(&model(0.0, 2.0, exp(1.0))),
            Err(RootError::NoPositiveRoot(_))
        ));
        assert!(solve_alpha(&model(3.0, 2.0, exp(1.0))).is_err());
    }

    #[test]
    fn beta_values() {
        let m = model(1.0, 2.0, exp(1.0));
        assert_eq!(solve_beta(&m, 0.0).unwrap(), solve_alpha(&m).unwrap());
        // beta^2 - 1.1 beta - 0.1 = 0
        let expected = (1.1 + 1.61f64.sqrt()) / 2.0;
        let r = solve_beta(&m, 0.1).unwrap();
        assert!((r.value - expected).abs() < 1e-12);
        assert!(r.residual.abs() < 1e-12);
        let r = solve_beta(&model(1.0, 2.0, mix()), 0.1).unwrap();
        assert!((r.value - 0.866_548_757_533_922_8).abs() < 1e-11);
        assert!(matches!(solve_beta(&model(0.0, 2.0, exp(1.0)), 0.5), Err(RootError::NoPositiveRoot(_))));
        // unprofitable but discounted: root still exists
        assert!(solve_beta(&model(3.0, 2.0, exp(1.0)), 0.5).is_ok());
    }

    #[test]
    fn beta_increasing_in_theta() {
        for m in [model(1.0, 2.0, exp(1.0)), model(1.0, 2.0, mix()), model(0.4, 5.0, mix())] {
            let mut prev = 0.0;
            for k in 0..40 {
                let theta = k as f64 * 0.25;
                let r = solve_beta(&m, theta).unwrap();
                assert!(r.value > prev);
                assert!(r.residual.abs() < 1e-12 * (1.0 + m.rho * r.value + m.lambda + theta));
                prev = r.value;
            }
        }
    }

    #[test]
    fn tilted_exponent() {
        let m = model(1.0, 2.0, exp(1.0));
        let r = solve_alpha_tilted(&m, 0.5).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-12);
        let small = solve_alpha_tilted(&m, 0.01).unwrap();
        assert!(small.value > 0.0 && small.value < 0.02);
        assert!(small.residual.abs() < 1e-12);
        // exponential: lambda / rho_eff - nu
        assert!((small.value - (2.0 / 1.99 - 1.0)).abs() < 1e-12);
        assert!(matches!(solve_alpha_tilted(&m, 0.0), Err(RootError::Precondition(_))));
        let mm = model(1.0, 2.0, mix());
        assert!((solve_alpha_tilted(&mm, 0.5).unwrap().value - 0.243_398_113_205_660_4).abs() < 1e-11);
        assert!((solve_alpha_tilted(&mm, 0.01).unwrap().value - 0.004_014_449_445_671_62).abs() < 1e-11);
    }

    #[test]
    fn tilted_monotone_and_limit() {
        for m in [model(1.0, 2.0, exp(1.0)), model(1.0, 2.0, mix())] {
            let alpha = solve_alpha(&m).unwrap().value;
            let mut prev = 0.0;
            for k in 1..=100 {
                let eps = k as f64 / 100.0;
                let r = solve_alpha_tilted(&m, eps).unwrap();
                assert!(r.value > prev);
                prev = r.value;
            }
            assert!((prev - alpha).abs() < 1e-10);
        }
    }

    #[test]
    fn mean_ruin_time() {
        let m = model(1.0, 2.0, exp(1.0));
        let t = defective_mean_ruin_time(&m, 1.0).unwrap();
        assert!((t.conditional_mean - 2.0).abs() < 1e-10);
        assert!((t.defective_mean - 2.0 * (-1.0f64).exp()).abs() < 1e-10);
        let t = defective_mean_ruin_time(&m, 1e-12).unwrap();
        assert!(t.conditional_mean < 1e-11 && t.defective_mean < 1e-11);

        // x / (rho (1 - rho nu / lambda)) for exponential jumps
        let m = model(1.0, 4.0, exp(2.0));
        let t = defective_mean_ruin_time(&m, 1.0).unwrap();
        assert!((t.conditional_mean - 2.0).abs() < 1e-10);
        assert!((t.defective_mean - 2.0 * (-2.0f64).exp()).abs() < 1e-10);

        let t = defective_mean_ruin_time(&model(1.0, 2.0, mix()), 1.0).unwrap();
        assert!((t.conditional_mean - 3.065_247_584_249_852_8).abs() < 1e-9);
        assert!(defective_mean_ruin_time(&model(2.0, 2.0, exp(1.0)), 1.0).is_err());
    }

    #[test]
    fn canonical_is_valid() {
        assert!(ModelParams::canonical().validate().is_ok());
        assert!(ModelParams::new(1.0, 0.0, 0.1, exp(1.0), 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, -0.1, exp(1.0), 1.0).is_err());
        assert!(ModelParams::new(1.0, 1.0, 0.1, exp(1.0), 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_model() -> impl Strategy<Value = ModelParams> {
            (0.05f64..5.0, 0.1f64..10.0, 0.2f64..5.0, 0.0f64..1.0, 0.2f64..5.0, 0.05f64..0.95).prop_filter_map(
                "profitable",
                |(rho, lambda, nu1, w, nu2, frac)| {
                    let d = JumpDistribution::mixture(vec![w, 1.0 - w], vec![nu1, nu2]).ok()?;
                    let rho = rho.min(frac * lambda * d.mean());
                    ModelParams::new(rho, lambda, 0.1, d, 1.0).ok()
                },
            )
        }

        proptest! {
            #[test]
            fn roots_satisfy_their_equations(m in arb_model(), theta in 0.0f64..3.0, eps in 0.01f64..1.0) {
                let scale = |v: f64| 1.0f64.max(m.rho * v + m.lambda + theta);
                let a = solve_alpha(&m).unwrap();
                prop_assert!(a.value > 0.0);
                prop_assert!(a.residual.abs() <= 1e-12 * scale(a.value));
                let b = solve_beta(&m, theta).unwrap();
                prop_assert!(b.residual.abs() <= 1e-12 * scale(b.value));
                prop_assert!(b.value >= a.value * (1.0 - 1e-9));
                let t = solve_alpha_tilted(&m, eps).unwrap();
                prop_assert!(t.value <= a.value * (1.0 + 1e-9));
                prop_assert!(t.value > 0.0);
            }

            #[test]
            fn ruin_time_denominator_positive(m in arb_model()) {
                let alpha = solve_alpha(&m).unwrap().value;
                prop_assert!(ruin_time_denominator(&m, alpha) > 0.0);
                // equivalent form: E[1 - e^{-aY} - aY e^{-aY}] > 0
                let f = 1.0 - m.jumps.laplace(alpha).unwrap() - alpha * m.jumps.laplace_weighted_mean(alpha).unwrap();
                prop_assert!(f > 0.0);
            }
        }
    }
}
