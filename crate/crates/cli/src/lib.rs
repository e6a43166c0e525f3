//! Library side of the `merl` command-line tool: scenario documents, output
//! formatting and the four subcommands.

pub mod commands;
pub mod document;
pub mod error;
pub mod output;

pub use document::ScenarioDocument;
pub use error::CliError;
