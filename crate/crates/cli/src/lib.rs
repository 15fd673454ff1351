//! Batch runner for the representativeness, privacy and utility benchmark:
//! fit generators, sample synthetic trips, evaluate them and write reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod schema;

pub use commands::{cmd_benchmark, cmd_evaluate, cmd_generate, cmd_report, cmd_simulate, GlobalOpts, ModelSource};
pub use config::BenchmarkConfig;
pub use error::CliError;
pub use report::Report;
