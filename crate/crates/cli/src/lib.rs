//! Configuration parsing, solver dispatch and result files for the
//! `dirichlet-einstein` command.

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod record;
pub mod run;

pub use config::{parse_config, Engine, Format, ProblemConfig};
pub use error::CliError;
pub use record::ResultRecord;
pub use run::{run, RunOutput, OUTPUT_DIR_ENV};
