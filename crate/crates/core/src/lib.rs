//! Stochastic gradient descent with momentum, its continuous-time limit and
//! the Lyapunov and supermartingale machinery behind its convergence
//! guarantees, with Monte-Carlo verification tools.

// Validation uses `!(x > 0.0)` and friends so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod concentration;
pub mod continuous;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod lyapunov;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
