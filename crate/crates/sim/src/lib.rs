//! Campaign runner, file formats and command-line front end for the
//! `fasura-core` simulator.

pub mod cache;
pub mod campaign;
pub mod cli;
pub mod manifest;
pub mod output;

pub use campaign::{RunError, Runner};
pub use manifest::{Mode, RunManifest};
