//! Command-line laboratory around `hlab-core`: configuration, checkpoints,
//! snapshot series on disk, report files and the experiment pipeline.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod series_io;
pub mod staging;

pub use config::ExperimentConfig;
pub use error::{LabError, Result};
