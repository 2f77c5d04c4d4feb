//! The JSON result document written by every subcommand.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Bumped on any incompatible change to `schema/result.schema.json`.
pub const SCHEMA_VERSION: &str = "1.0.0";
pub const TOOL_NAME: &str = "nftrap";
pub const RESULT_FILE: &str = "result.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    /// RFC 3339, UTC. The only field that differs between identical runs.
    pub timestamp: String,
    pub paper_defaults: bool,
    pub inputs: Vec<InputFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub schema_version: String,
    pub command: String,
    pub config: ExperimentConfig,
    pub payload: serde_json::Value,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

impl ResultDocument {
    pub fn new(command: &str, config: &ExperimentConfig, payload: serde_json::Value, warnings: Vec<String>, provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            config: config.clone(),
            payload,
            warnings,
            provenance,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<std::path::PathBuf, CliError> {
        let path = out_dir.join(RESULT_FILE);
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

pub fn provenance(paper_defaults: bool, inputs: Vec<InputFile>) -> Provenance {
    Provenance {
        tool: TOOL_NAME.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        paper_defaults,
        inputs,
    }
}

pub fn hash_input(role: &str, path: &Path) -> Result<InputFile, CliError> {
    let mut file = std::fs::File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let sha256 = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok(InputFile { role: role.into(), path: path.display().to_string(), sha256 })
}
