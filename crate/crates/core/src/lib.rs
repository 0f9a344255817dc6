//! Adaptive Gaussian-process surrogates for Bayesian inverse problems.
//!
//! A GP surrogate of an expensive forward model is trained while the
//! surrogated posterior is sampled by MCMC. Each outer iteration picks new
//! evaluation points and distributes a work budget over per-point
//! simulation tolerances so as to reduce an estimate of the KL divergence
//! between the surrogated and the true posterior.
//!
//! Module map:
//! - [`gp`], [`hyper`]: heteroscedastic GP regression and calibration
//! - [`bayes`]: likelihoods and log-posteriors
//! - [`sampler`]: random-walk Metropolis and chain bookkeeping
//! - [`doe`]: error estimates, utility, candidate and tolerance optimisation
//! - [`models`]: forward models, noisy evaluation, work model
//! - [`driver`]: the interleaved training/sampling loop
//! - [`bench`]: baselines, true-posterior KL and the benchmark harness

pub mod bayes;
pub mod bench;
pub mod config;
pub mod doe;
pub mod driver;
pub mod error;
pub mod exec;
pub mod gp;
pub mod hyper;
pub mod lhs;
pub mod models;
pub mod rng;
pub mod sampler;
mod serde_inf;

pub use error::{Error, Result};
pub use exec::Exec;
