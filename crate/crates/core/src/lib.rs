//! Pool-based Bayesian active learning at desk scale.
//!
//! The pieces: multiclass Bayesian logistic regression with a Laplace
//! posterior ([`bayes`]), information-theoretic acquisition scores and batch
//! selection rules ([`acquisition`]), ParBaLS pseudo-label batch
//! construction ([`parbals`]), the BAIT trace criterion ([`bait`]), scenario
//! construction ([`dataset`]), brute-force verification batteries
//! ([`oracle`]), and a deterministic experiment loop with a CLI ([`harness`]).

pub mod acquisition;
pub mod bait;
pub mod bayes;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub(crate) mod parallel;
pub mod parbals;
pub mod rng;

pub use error::{Error, Result};
