//! The generalized ODE limit, the auxiliary SDE and the continuous-discrete
//! L2 distance estimator.

mod l2;
mod ode;
mod sde;

pub use l2::{l2_limit_estimate, l2_trend, write_l2_csv, L2Row, L2Setup, L2Trend, MIN_L2_STEPS};
pub use ode::{ode_integrate, ode_rate_bound, ode_rate_check, OdeParams, OdeRateReport, OdeSolution};
pub use sde::{
    grid_index, grid_marginal_comparison, sde_integrate, sgdm_grid_path, sgdm_velocity_advance, GridPath,
    MarginalComparison,
};
