//! Benchmark harness: experiment plans, seeded sweeps, latency statistics,
//! CSV emission and regression analysis.
//!
//! The five built-in plans sweep groups, kernel size, input width, input
//! channels and filter count with the other parameters fixed; custom sweeps
//! come from TOML plan files. Records land in a fixed-schema CSV consumed
//! by downstream tooling (and by `regress` here). Host wall-clock numbers
//! reproduce trends and linearity, not any particular device's absolute
//! latencies.

mod csvio;
mod plan;
mod randgen;
mod regress;
mod runner;
mod verify;

pub use csvio::{parse_csv, read_csv_file, write_csv, write_csv_file, CSV_HEADER};
pub use plan::{build_spec, load_plan, parse_plan, ExperimentPlan, FixedParams, SweepConfig, SweptParameter};
pub use randgen::{random_qtensor, random_qweights, random_shift_table, random_weights_for};
pub use regress::{ols, regress, RegressionResult, RegressionX};
pub use runner::{run_experiment, run_sweep, BenchRecord};
pub use verify::{verify_bitexact, VerifyReport};
