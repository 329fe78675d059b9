//! Scenario runner for the `swarmfield` command.

pub mod catalog;
pub mod error;
pub mod init;
pub mod runner;
pub mod scenario;

pub use error::CliError;
pub use runner::{run_scenario, RunReport};
pub use scenario::{load_scenario, parse_scenario, Scenario};
