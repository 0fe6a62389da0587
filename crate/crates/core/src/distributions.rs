//! Jump-size laws for the revenue stream.
//!
//! Only exponentials and finite mixtures of exponentials are supported. Every
//! functional the solvers need (Laplace transform, survival, excess mean) is
//! then available in closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("rate must be finite and > 0 (got {0})")]
    NonPositiveRate(f64),
    #[error("weights must be finite and >= 0 (got {0})")]
    NegativeWeight(f64),
    #[error("weights must sum to 1 (got {0})")]
    WeightSum(f64),
    #[error("weights and rates must have the same nonzero length ({weights} vs {rates})")]
    LengthMismatch { weights: usize, rates: usize },
    #[error("argument {arg} is outside the domain (must be > {bound})")]
    Domain { arg: f64, bound: f64 },
    #[error("argument must be >= 0 (got {0})")]
    Negative(f64),
}

/// Law of the jump sizes `Y_i`.
///
/// Construct through [`JumpDistribution::exponential`] or
/// [`JumpDistribution::mixture`] (or deserialize, which validates the same way).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJump", into = "RawJump")]
pub enum JumpDistribution {
    Exponential { nu: f64 },
    Mixture { weights: Vec<f64>, rates: Vec<f64> },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawJump {
    Exponential { nu: f64 },
    Mixture { weights: Vec<f64>, rates: Vec<f64> },
}

impl TryFrom<RawJump> for JumpDistribution {
    type Error = DistributionError;

    fn try_from(raw: RawJump) -> Result<Self, Self::Error> {
        match raw {
            RawJump::Exponential { nu } => JumpDistribution::exponential(nu),
            RawJump::Mixture { weights, rates } => JumpDistribution::mixture(weights, rates),
        }
    }
}

impl From<JumpDistribution> for RawJump {
    fn from(d: JumpDistribution) -> Self {
        match d {
            JumpDistribution::Exponential { nu } => RawJump::Exponential { nu },
            JumpDistribution::Mixture { weights, rates } => RawJump::Mixture { weights, rates },
        }
    }
}

fn check_rate(nu: f64) -> Result<(), DistributionError> {
    if nu.is_finite() && nu > 0.0 {
        Ok(())
    } else {
        Err(DistributionError::NonPositiveRate(nu))
    }
}

impl JumpDistribution {
    pub fn exponential(nu: f64) -> Result<Self, DistributionError> {
        check_rate(nu)?;
        Ok(JumpDistribution::Exponential { nu })
    }

    pub fn mixture(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self, DistributionError> {
        if weights.len() != rates.len() || weights.is_empty() {
            return Err(DistributionError::LengthMismatch {
                weights: weights.len(),
                rates: rates.len(),
            });
        }
        for &nu in &rates {
            check_rate(nu)?;
        }
        for &w in &weights {
            if !(w.is_finite() && w >= 0.0) {
                return Err(DistributionError::NegativeWeight(w));
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(DistributionError::WeightSum(total));
        }
        Ok(JumpDistribution::Mixture { weights, rates })
    }

    /// Exponential rate if the law is a single exponential.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self {
            JumpDistribution::Exponential { nu } => Some(*nu),
            JumpDistribution::Mixture { .. } => None,
        }
    }

    /// Sum over components of `f(weight, rate)`.
    fn fold(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        match self {
            JumpDistribution::Exponential { nu } => f(1.0, *nu),
            JumpDistribution::Mixture { weights, rates } => {
                weights.iter().zip(rates).map(|(&w, &nu)| f(w, nu)).sum()
            }
        }
    }

    pub fn min_rate(&self) -> f64 {
        match self {
            JumpDistribution::Exponential { nu } => *nu,
            JumpDistribution::Mixture { rates, .. } => {
                rates.iter().copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.fold(|w, nu| w / nu)
    }

    pub fn second_moment(&self) -> f64 {
        self.fold(|w, nu| 2.0 * w / (nu * nu))
    }

    fn check_laplace_arg(&self, a: f64) -> Result<(), DistributionError> {
        let bound = -self.min_rate();
        if a.is_nan() || a <= bound {
            Err(DistributionError::Domain { arg: a, bound })
        } else {
            Ok(())
        }
    }

    /// `E[exp(-a Y)]`.
    pub fn laplace(&self, a: f64) -> Result<f64, DistributionError> {
        self.check_laplace_arg(a)?;
        Ok(self.laplace_unchecked(a))
    }

    pub(crate) fn laplace_unchecked(&self, a: f64) -> f64 {
        self.fold(|w, nu| w * nu / (nu + a))
    }

    /// `E[Y exp(-a Y)]`, which is also `-d/da laplace(a)`.
    pub fn laplace_weighted_mean(&self, a: f64) -> Result<f64, DistributionError> {
        self.check_laplace_arg(a)?;
        Ok(self.laplace_weighted_mean_unchecked(a))
    }

    pub(crate) fn laplace_weighted_mean_unchecked(&self, a: f64) -> f64 {
        self.fold(|w, nu| w * nu / ((nu + a) * (nu + a)))
    }

    /// `P(Y > u)`.
    pub fn survival(&self, u: f64) -> Result<f64, DistributionError> {
        if u.is_nan() || u < 0.0 {
            return Err(DistributionError::Negative(u));
        }
        Ok(self.fold(|w, nu| w * (-nu * u).exp()))
    }

    /// `P(Y <= u)`; zero for negative `u`.
    pub fn cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            0.0
        } else {
            1.0 - self.fold(|w, nu| w * (-nu * u).exp())
        }
    }

    /// Density `p(y)`; zero for negative `y`.
    pub fn density(&self, y: f64) -> f64 {
        if y < 0.0 {
            0.0
        } else {
            self.fold(|w, nu| w * nu * (-nu * y).exp())
        }
    }

    /// `E[(Y - u)^+] = ∫_u^∞ (y - u) p(y) dy`.
    pub fn mean_excess_integral(&self, u: f64) -> Result<f64, DistributionError> {
        if u.is_nan() || u < 0.0 {
            return Err(DistributionError::Negative(u));
        }
        Ok(self.fold(|w, nu| w * (-nu * u).exp() / nu))
    }

    /// Maps one uniform in `[0, 1)` to a jump size.
    ///
    /// Mixtures pick the component from the uniform and rescale the remainder
    /// inside that component's cell, so a single draw per jump is consumed.
    pub fn quantile_from_uniform(&self, u: f64) -> f64 {
        match self {
            JumpDistribution::Exponential { nu } => -(1.0 - u).ln() / nu,
            JumpDistribution::Mixture { weights, rates } => {
                let mut lower = 0.0;
                let last = weights.len() - 1;
                for (k, (&w, &nu)) in weights.iter().zip(rates).enumerate() {
                    let upper = lower + w;
                    if (u < upper && w > 0.0) || k == last {
                        let inner = if w > 0.0 {
                            ((u - lower) / w).clamp(0.0, 1.0 - f64::EPSILON / 2.0)
                        } else {
                            u
                        };
                        return -(1.0 - inner).ln() / nu;
                    }
                    lower = upper;
                }
                unreachable!("mixture has at least one component")
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile_from_uniform(rng.random::<f64>())
    }
}
