//! Scenario files, artifacts and the `dnncov` commands.

pub mod artifacts;
pub mod commands;
pub mod render;
pub mod scenario;

pub use commands::{cmd_plan, cmd_render, cmd_simulate, cmd_validate, CliError};
pub use scenario::{ScenarioError, ScenarioFile};
