//! Calibration command-line toolkit built on `octav-core`.
//!
//! The library half hosts everything the `octav` binary does so that tests
//! can drive the commands in-process: argument grammars ([`args`]), report
//! schemas ([`report`]), synthetic fixture generators ([`synthetic`]), and
//! the subcommand implementations ([`commands`]).

pub mod args;
pub mod commands;
pub mod report;
pub mod synthetic;

pub use args::{BoundaryArg, GranularityArg, Method};
pub use commands::{
    run_bench, run_calibrate, run_gen_fixtures, run_quantize, run_sweep_curve, scan_input_dir,
    FixtureKind, QuantOpts, QuantizeOutcome, ScalarSource, TensorFiles,
};
pub use report::{BenchReport, BenchResult, CalibrationReport, TensorReport, Values};
