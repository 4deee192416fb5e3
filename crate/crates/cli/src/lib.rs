//! Experiment runner behind the `volterra` binary.

pub mod config;
pub mod run;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::Config;
pub use run::{run, Outcome, RunError};

/// Reads, runs and writes one experiment. Nothing is written unless the
/// whole experiment succeeds.
pub fn execute(config_path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<PathBuf, RunError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| RunError::Parse(format!("cannot read {}: {e}", config_path.display())))?;
    let mut config = Config::parse(&text).map_err(|e| RunError::Parse(e.message().replace('\n', " ")))?;
    let dir = out
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    config.output = Some(dir.display().to_string());
    let outcome = run(config, seed)?;
    let io = |e: std::io::Error| RunError::Validation(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(&dir).map_err(io)?;
    for (name, bytes) in &outcome.files {
        fs::write(dir.join(name), bytes).map_err(io)?;
    }
    fs::write(dir.join("manifest.toml"), outcome.manifest.to_toml()).map_err(io)?;
    Ok(dir)
}
