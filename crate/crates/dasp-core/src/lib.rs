//! Dependency-aware shrinkage priors for high dimensional linear regression.
//!
//! The crate provides:
//!
//! * parametric correlation structures and their validation ([`corr`]),
//! * estimation of the predictor covariance and construction of the
//!   coefficient dependence matrix, including Ledoit-Wolf linear
//!   shrinkage ([`omega`]),
//! * the shrinkage prior hierarchies with defaults, prior sampling and log
//!   densities ([`priors`]),
//! * closed-form and Monte Carlo prior/posterior analytics: conditional
//!   moments, spectral bounds, divergences, shrinkage factors, effective
//!   model size ([`analytics`]),
//! * a blocked Gibbs sampler with convergence diagnostics ([`sampler`]),
//! * a simulation and evaluation harness: generative scenarios, predictive
//!   and recovery metrics, paired comparisons, exact leave-one-out
//!   cross-validation ([`sim`], [`metrics`]).
//!
//! All Monte Carlo paths take explicit seeds and derive per-task substreams,
//! so results are reproducible bit-for-bit and independent of thread count.

pub mod analytics;
pub mod corr;
pub mod csvio;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod metrics;
pub mod omega;
pub mod priors;
pub mod rng;
pub mod sampler;
pub mod sim;

pub use error::{Error, Result};
