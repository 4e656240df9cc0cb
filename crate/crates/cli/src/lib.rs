//! Operational surface for the regret-minimization harness: experiment
//! runner, sweep orchestration, and the verification suites.

pub mod config;
pub mod runner;
pub mod sweep;
pub mod verify;

/// Exit codes: 0 success, 1 check/runtime failure, 2 config error.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG_ERROR: i32 = 2;
