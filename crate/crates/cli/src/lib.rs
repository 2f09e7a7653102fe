//! Scenario-driven runs of the snapnet simulator: `simulate`, `sweep`,
//! `analyze` and `fit`, each writing CSV artifacts and a manifest.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod presets;
pub mod report;
pub mod scenario;

pub use commands::{cmd_analyze, cmd_fit, cmd_simulate, cmd_sweep, load_file, load_input, Outcome};
pub use error::CliError;
pub use manifest::Input;
