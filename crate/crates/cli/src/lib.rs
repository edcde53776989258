//! Command-line driver for spin-boson non-Markovianity runs: configuration,
//! simulations, measurements, parameter sweeps and the `α → 0` limit, together
//! with the CSV formats they exchange.

// `!(x > 0.0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv_io;
pub mod error;

pub use config::{parse_config, ConfigValues, RunConfig, Solver, SweepSpec};
pub use error::{CliError, Result};
