//! Machine-readable report files and atomic output.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Top-level report document. Identical scene + seed + flags produce
/// byte-identical content except for the wall-clock field.
#[derive(Debug, Serialize)]
pub struct Report {
    pub tool_version: &'static str,
    pub scene_digest: String,
    pub command: String,
    pub seed: u64,
    pub thresholds: Vec<Threshold>,
    pub checks: serde_json::Value,
    pub verdict: String,
    pub wall_clock_ms: u128,
}

#[derive(Debug, Serialize)]
pub struct Threshold {
    pub name: &'static str,
    pub value: f64,
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(7 + 2 * digest.len());
    out.push_str("sha256:");
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

/// Write-then-rename so readers never observe a partial file.
pub fn atomic_write(path: &Path, content: &str) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)
}

pub fn emit(report: &Report, out: Option<&Path>) -> std::io::Result<()> {
    let text = serde_json::to_string_pretty(report).expect("reports always serialize");
    match out {
        Some(path) => atomic_write(path, &text),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
