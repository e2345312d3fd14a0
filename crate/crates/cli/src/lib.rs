//! The `savcd` command-line harness.
//!
//! Subcommands:
//!
//! - `decode`: select an augmentation, build the amateur view, run the
//!   contrastive decode loop, write a JSONL trace and print a JSON summary.
//! - `ablate`: run a threshold-mode grid over a scripted benchmark suite and
//!   emit CSV.
//! - `augment`: apply one augmentation to a PNG.
//! - `serve-stub`: serve a synthetic script over the HTTP logit protocol.
//! - `export-demo`: write the bundled demo script, image, suite and schema.
//!
//! Exit codes: 2 configuration, 3 backend, 4 image or file I/O.

pub mod cli;
pub mod commands;
pub mod config;
pub mod demo;
pub mod error;

pub use cli::{Cli, Command};
pub use config::{RunConfig, RunOptions};
pub use error::CliError;
