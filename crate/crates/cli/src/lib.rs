//! Config-driven experiment harness for `semilab`: one TOML file describes
//! one experiment; results land as CSV files plus a `summary.txt`.

pub mod config;
pub mod csv_out;
pub mod run;

pub use config::{parse_config, ConfigError, Experiment, ExperimentConfig};
pub use csv_out::{emit_csv, format_float, Series};
pub use run::{run_experiment, RunError, RunSummary};
