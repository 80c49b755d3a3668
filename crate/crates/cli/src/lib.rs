//! File formats, configuration and experiment drivers behind the `chebspike`
//! command-line tool.

pub mod config;
pub mod error;
pub mod formats;
pub mod harness;
pub mod table;

pub use config::{ExperimentConfig, Mode, Overrides};
pub use error::{CliError, CliResult};
pub use harness::{run, Outcome};
