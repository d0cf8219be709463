//! Library surface of the pipeline runner: configuration, stage
//! orchestration, manifests, and the synthetic fixture generator used by the
//! test suites.

pub mod config;
pub mod error;
pub mod fixture;
pub mod manifest;
pub mod pipeline;

pub use config::{Overrides, RunConfig};
pub use error::{CliError, CliResult};
pub use pipeline::{run, Command};
