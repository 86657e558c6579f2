//! One-run differential-privacy auditing.
//!
//! Canaries are split into members and non-members, a mechanism is run once,
//! every canary is scored against the released output, and the auditor's
//! guesses are converted into a high-confidence lower bound on epsilon.
//!
//! - [`smallnet`]: dense networks with per-example gradients.
//! - [`mechanisms`]: randomized response, a Gaussian canary oracle, and DP-SGD.
//! - [`game`]: the binary membership game and the K-ary reconstruction game.
//! - [`scores`]: margin/loss scores and quantile-regression rescoring.
//! - [`estimator`]: binomial-tail epsilon lower bounds and budget sweeps.
//! - [`harness`]: experiment configuration, trials, persistence and reports.

pub mod error;
pub mod estimator;
pub mod game;
pub mod harness;
pub mod mechanisms;
pub mod rng;
pub mod scores;
pub mod smallnet;
pub mod special;

pub use error::{AuditError, Result};
