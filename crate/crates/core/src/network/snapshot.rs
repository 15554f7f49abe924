//! Text container for parameter snapshots.
//!
//! ```text
//! gampinn-params 1
//! layer_sizes 2 20 20 20 20 20 20 20 1
//! layer 0 <weights row-major> <biases>
//! ...
//! ```
//!
//! Values are written with Rust's shortest round-trip float formatting, so a
//! write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use super::MlpParams;
use crate::error::{Error, Result};

pub const SNAPSHOT_VERSION: u32 = 1;
const MAGIC: &str = "gampinn-params";

pub fn encode_snapshot(params: &MlpParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {SNAPSHOT_VERSION}");
    let sizes: Vec<String> = params.layer_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "layer_sizes {}", sizes.join(" "));
    for l in 0..params.num_layers() {
        let _ = write!(out, "layer {l}");
        for v in params.layer(l) {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn decode_snapshot(text: &str) -> Result<MlpParams> {
    let bad = |m: &str| Error::Format(format!("parameter snapshot: {m}"));
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty input"))?;
    let mut hp = header.split_whitespace();
    if hp.next() != Some(MAGIC) {
        return Err(bad("missing magic header"));
    }
    let version: u32 = hp
        .next()
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| bad("missing version"))?;
    if version != SNAPSHOT_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let sizes_line = lines.next().ok_or_else(|| bad("missing layer_sizes"))?;
    let mut sp = sizes_line.split_whitespace();
    if sp.next() != Some("layer_sizes") {
        return Err(bad("expected layer_sizes"));
    }
    let sizes: Vec<usize> = sp
        .map(|s| s.parse().map_err(|_| bad("bad layer size")))
        .collect::<Result<_>>()?;
    let mut layers = Vec::new();
    for (l, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("layer") || parts.next() != Some(&l.to_string()) {
            return Err(bad(&format!("expected layer {l}")));
        }
        let vals: Vec<f64> = parts
            .map(|s| s.parse().map_err(|_| bad("bad float")))
            .collect::<Result<_>>()?;
        layers.push(vals);
    }
    MlpParams::from_layers(&sizes, layers).map_err(|e| bad(&e.to_string()))
}

pub fn write_snapshot(path: &Path, params: &MlpParams) -> Result<()> {
    std::fs::write(path, encode_snapshot(params))?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<MlpParams> {
    decode_snapshot(&std::fs::read_to_string(path)?)
}
