//! Optimal investment and proportional reinsurance for an insurer with
//! forward exponential preferences in a market driven by a stochastic
//! factor, together with the classical fixed-horizon comparison and a Monte
//! Carlo laboratory to check the optimality properties.
//!
//! Modules:
//! - [`market`]: coefficients, claims, correlations, assumption checks.
//! - [`premia`]: premium principles.
//! - [`reinsurance`]: optimal retention Θ̄ and φ.
//! - [`forward`]: penalizer variants, optimal investment, generator checks.
//! - [`backward`]: fixed-horizon value function (ODE ansatz, Feynman–Kac).
//! - [`sim`]: path simulation, martingale diagnostics, certainty equivalents.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backward;
pub mod config;
pub mod error;
pub mod forward;
pub mod market;
pub mod premia;
pub mod presets;
pub mod quad;
pub mod reinsurance;
pub mod sim;

pub use error::{Error, Result};
