//! Corpus files, checkpoints, run manifests and the `twostage` command line
//! around the `twostage-core` engine.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod corpus;
pub mod error;
pub mod manifest;
pub mod pretrained;
pub mod trainlog;

pub use checkpoint::{Checkpoint, CheckpointError};
pub use error::{CliError, CliResult};
