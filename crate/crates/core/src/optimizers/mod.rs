//! SGDM, the SGD baseline, AC-SA, step-size schedules and trajectory logging.

mod acsa;
mod schedule;
mod sgd;
mod sgdm;
mod trajectory;

pub use acsa::AcsaState;
pub use schedule::{ScheduleKind, StepSchedule};
pub use sgd::{sgd_step, sgd_step_eta};
pub use sgdm::{noise_coefficient, velocity_step, SgdmState};
pub use trajectory::{
    run_trajectory, Algorithm, RowVectors, RunOptions, TrajectoryRecord, TrajectoryRow, TRAJECTORY_CSV_HEADER,
};
