use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skybell_core::scenarios::Scenario;

use crate::error::{CliError, CliResult};

/// Sidecar record of how an output file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub config: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    pub seed: Option<u64>,
    pub n: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            command: command.to_owned(),
            args: std::env::args().skip(1).collect(),
            config: None,
            scenario: None,
            seed: None,
            n: None,
            outputs: Vec::new(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }
}

/// `<output>.manifest.json`
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write(manifest: &RunManifest, output: &Path) -> CliResult<PathBuf> {
    let path = manifest_path(output);
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

/// The manifest next to `output`, if there is a readable one.
pub fn read_for(output: &Path) -> Option<RunManifest> {
    let text = std::fs::read_to_string(manifest_path(output)).ok()?;
    serde_json::from_str(&text).ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_name() {
        assert_eq!(manifest_path(Path::new("out/scan.csv")), PathBuf::from("out/scan.csv.manifest.json"));
    }
}
