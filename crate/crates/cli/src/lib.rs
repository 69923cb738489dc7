//! Scenario configuration, execution, sweeps and artifact output for the
//! `sisd` command line tool.

pub mod config;
pub mod error;
pub mod scenario;
pub mod sweep;

pub use config::ScenarioConfig;
pub use error::CliError;
pub use scenario::{run_scenario, RunSummary, EXIT_CERTIFICATE, EXIT_CONFIG, EXIT_PASS};
pub use sweep::{read_grid, sweep, SweepReport};
