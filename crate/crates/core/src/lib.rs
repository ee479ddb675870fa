//! Simulation and inference toolkit for studying how motivated (biased)
//! binary judgments propagate through wave-structured social networks.
//!
//! The toolkit is organized around a single behavioral model: an agent
//! judging which of two colors (green/blue) covers more of a dot grid
//! chooses green with probability
//!
//! ```text
//! p(green) = 1 / (1 + exp(-(alpha * (k - n/2) + gamma + beta)))
//! ```
//!
//! where `k` of `n` observed prior judgments chose green (`alpha = 0` or the
//! whole term absent for asocial agents), `gamma` captures the stimulus
//! evidence, and `beta` is the agent's motivated bias on the green/blue axis.
//!
//! On top of that model the crate provides:
//!
//! * [`judgment`] — the choice-probability primitives themselves;
//! * [`chain`] — the binomial Markov chain over "k of n choose green" states,
//!   its stationary distribution, and bias-amplification curves;
//! * [`inference`] — hierarchical Bayesian (IRT-style) estimation of biases
//!   and stimulus effects with a NUTS sampler and a brute-force grid oracle;
//! * [`resample`] — the importance-weighted judgment resampler used to
//!   debias the social information shown to downstream waves;
//! * [`sim`] — full experiment simulation (wave plans, yoked conditions,
//!   in-loop refitting and resampling) and the power analysis built on it;
//! * [`stats`] — fixed-effects logistic regression, likelihood-ratio tests,
//!   and condition summary tables for simulated traces;
//! * [`trace`] / [`manifest`] / [`plot`] — the persistence layer: trial-level
//!   CSV traces, reproducibility manifests, and plot-ready data files.
//!
//! Every stochastic component draws from deterministic seed substreams
//! ([`seed`]), so a run is reproducible bit-for-bit from its manifest, with
//! or without the `parallel` feature (work scheduling never affects output;
//! see [`exec`]).

#![deny(missing_docs)]

pub mod chain;
pub mod error;
pub mod exec;
pub mod inference;
pub mod judgment;
pub mod manifest;
pub mod math;
pub mod plot;
pub mod resample;
pub mod seed;
pub mod sim;
pub mod stats;
pub mod trace;

pub use error::Error;

/// Crate version recorded in run manifests.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
