//! Convex test objectives and their stochastic-gradient oracles.

mod dataset;
mod noise;
mod objective;

pub use dataset::{load_csv, read_csv, synthetic_blobs, Dataset};
pub use noise::{sample_gradient, sample_gradient_into, NoiseKind, NoiseModel};
pub use objective::{descend_to_tolerance, fstar_refine, Objective, DEFAULT_REFINE_TOL, PSD_EIGEN_FLOOR};
