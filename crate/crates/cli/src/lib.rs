//! Command-line front end: flat config files, CSV tables, run manifests and
//! the `ehgo` subcommands.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod output;

pub use commands::{run_command, CliError};
pub use config::{echo_config, parse_config, ConfigError};
pub use manifest::RunManifest;
pub use output::{format_g15, read_csv, render_csv, write_csv, CsvTable};
