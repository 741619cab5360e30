//! File formats, a seeded parallel Monte Carlo harness and the command-line
//! front end for [`specmdp_core`].

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod montecarlo;
pub mod stats;
pub mod verification;

pub use config::{Experiment, ExperimentConfig};
pub use error::{Error, Result};
pub use montecarlo::{ExperimentReport, Harness, ReportRow, Rule};
