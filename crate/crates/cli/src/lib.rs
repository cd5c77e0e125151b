//! Command-line front end for `rapidkrig-core`: observation input, the
//! `RKGRID1` grid format, trend formulas and the reproduction studies.

pub mod cli;
pub mod covariates;
pub mod error;
pub mod io;
pub mod study;

pub use error::{CliError, Result};
