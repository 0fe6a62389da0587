//! Optimal dividends in the dual risk model.
//!
//! The surplus of a firm decreases at a deterministic cost rate and jumps up by
//! random revenues at Poisson epochs. This crate provides the exponent
//! equations of the uncontrolled process, the closed-form optimal barrier for
//! exponential revenues, a backward integro-ODE solver with barrier shooting
//! for mixtures, an exact event-driven simulator for several dividend
//! strategies, and sweeps that check the value function in extreme parameter
//! regimes.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod closed_form;
pub mod config;
pub mod distributions;
pub mod lundberg;
pub mod output;
pub mod pide;
pub mod regimes;
pub mod simulate;

pub use distributions::JumpDistribution;
pub use lundberg::ModelParams;
