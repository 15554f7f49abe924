//! Run manifests.
//!
//! A manifest is a configuration file: the resolved value of every key
//! followed by one comment line per artifact with its SHA-256 digest.
//! Passing it back through `--config` repeats the run.

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.txt";

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Write the manifest of `config` into its output directory. Artifact
/// paths are stored relative to that directory.
pub fn write_manifest(config: &RunConfig, artifacts: &[PathBuf]) -> CliResult<PathBuf> {
    let mut text = format!("# gampinn manifest, command {}\n", config.command);
    text.push_str(&config.to_config_text());
    for a in artifacts {
        let rel = a.strip_prefix(&config.out_dir).unwrap_or(a);
        text.push_str(&format!("# sha256 {} {}\n", sha256_file(a)?, rel.display()));
    }
    let path = config.out_dir.join(MANIFEST_FILE);
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// `(digest, relative path)` of every artifact listed in a manifest.
pub fn manifest_artifacts(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# sha256 "))
        .filter_map(|l| {
            let (digest, path) = l.split_once(' ')?;
            Some((digest.to_string(), path.to_string()))
        })
        .collect()
}
