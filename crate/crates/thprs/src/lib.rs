//! Std front end for `thprs-core`: parallel sweeps, result files,
//! validation suites and the `thprs` command line.
//!
//! ```no_run
//! let config = thprs::core::sweep::SweepConfig::default();
//! let result = thprs::parallel::run_sweep_parallel(&config).unwrap();
//! thprs::output::write_csv(&result, &config, std::io::stdout()).unwrap();
//! ```

pub mod cli;
pub mod output;
pub mod parallel;
pub mod validate;

pub use thprs_core as core;
