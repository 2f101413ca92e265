//! Configuration-driven experiments for the `lowrank-core` solvers:
//! sweeps, seed averaging, CSV traces, predicted curves and invariant checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod output;
pub mod presets;
pub mod runner;
pub mod theory;
pub mod verify;

pub use config::{ConfigError, ExperimentConfig, MethodName};
pub use runner::{run_experiment, ExperimentResult, RunError, RunRecord, TraceRow};
pub use verify::{verify, VerifyReport};

/// Process exit statuses of the `lowrank` binary.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const DIVERGED: i32 = 3;
    pub const VERIFY_FAILED: i32 = 4;
}
