//! Run manifests: a JSON record dropped beside every command's outputs with
//! enough resolved configuration to reproduce the run.

use std::path::{Path, PathBuf};
use std::time::Instant;

use floodsr::Result;
use serde::Serialize;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub version: &'static str,
    /// Absent for commands whose output is a pure function of their inputs.
    pub seed: Option<u64>,
    /// The parsed arguments after defaulting, verbatim.
    pub config: serde_json::Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock duration; the only field that varies between identical runs.
    pub duration_ms: u128,
}

/// Writes the manifest next to `primary`: into it when it is a directory,
/// as a `.run.json` sibling otherwise. Returns the manifest path.
pub fn write_run_manifest(
    command: &'static str,
    config: &impl Serialize,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[&Path],
    started: Instant,
    primary: &Path,
) -> Result<PathBuf> {
    let manifest = RunManifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: serde_json::to_value(config)?,
        inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
        outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
        duration_ms: started.elapsed().as_millis(),
    };
    let path = if primary.is_dir() {
        primary.join("run.json")
    } else {
        let name = primary
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        primary.with_file_name(format!("{name}.run.json"))
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
