//! Command-line plumbing for `ldpsgd`: manifests, CSV ingestion, reports
//! and the `simulate`, `analyze` and `critvals` subcommands.

pub mod commands;
pub mod config;
pub mod dataset;
pub mod error;
pub mod output;
pub mod report;

pub use commands::{analyze, analyze_dataset, critical_table, simulate, trajectory_checkpoints};
pub use config::{Mode, RunConfig};
pub use dataset::{load_csv, Dataset};
pub use error::{CliError, Result};
pub use report::{Record, Report};
