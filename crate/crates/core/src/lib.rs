//! Multi-armed bandit channel scheduling for asynchronous federated learning
//! over non-stationary Bernoulli channels.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: channel processes (stationary, piecewise-stationary, adversarial).
//! - [`aoi`]: age-of-information bookkeeping and AoI regret.
//! - [`policy`]: schedulers (oracle, random, M-Exp3, GLR-CUCB, AoI-aware wrapper).
//! - [`matching`]: fairness-aware client-to-channel matching and aggregation weights.
//! - [`flsim`]: a small asynchronous federated-learning harness on a synthetic task.
//! - [`sim`]: bandit-only simulation driver with common random numbers.
//! - [`experiment`]: declarative experiment configs, presets, runner and summaries.

pub mod aoi;
pub mod env;
pub mod error;
pub mod experiment;
pub mod flsim;
pub mod matching;
pub mod policy;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
