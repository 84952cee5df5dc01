//! Command-line harness: TOML configs with flag overrides, one subcommand
//! per experiment, CSV/JSON artifacts and a `verdict.json` per invocation.
//!
//! Exit codes are 0 when every asserted check passes, 1 when a check fails
//! or a run errors, and 2 for invalid configuration or usage.

mod cli;
mod commands;
mod config;
mod verdict;

pub use cli::{execute, main_with_args, Command, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
pub use config::{
    AlgorithmName, AnytimeConfig, ConcentrationConfig, ConstantsConfig, DescentConfig, Diagnostic, ExpectationConfig,
    ExperimentConfig, NoiseConfig, NoiseConfigKind, OdeConfig, ProblemConfig, ProblemKind, RunConfig, ScheduleConfig,
    SmoothnessConfig, SupermartingaleConfig,
};
pub use verdict::{Check, Outputs, Verdict};
