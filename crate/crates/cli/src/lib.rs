//! File formats, HTTP backends and the resumable stage pipeline behind the
//! `wader` command.

pub mod config;
pub mod error;
pub mod formats;
pub mod http;
pub mod pipeline;
pub mod report;

pub use config::PipelineConfig;
pub use error::{CliError, Result};
pub use pipeline::{Pipeline, RunOptions, Stage, StageStatus};
