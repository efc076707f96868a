//! Command-line front end: parses a run description, executes it against the
//! `auction-frontier` library and renders CSV or JSON artifacts with provenance headers.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::Path;

pub use config::RunConfig;
pub use error::{CliError, Result};

/// Execute `cfg` and render its artifact without writing it anywhere.
pub fn render(cfg: &RunConfig) -> Result<output::Artifact> {
    let (meta, payload) = commands::execute(cfg)?;
    output::render(&meta, &payload, cfg.format())
}

/// Execute `cfg` and write the artifact to its destination; returns the path written, if any.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<Option<std::path::PathBuf>> {
    let artifact = render(cfg)?;
    let dest = output::destination(cfg, out_dir);
    output::write(&artifact, dest.as_deref())?;
    Ok(dest)
}
