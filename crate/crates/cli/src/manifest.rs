//! Per-subcommand run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sara_core::io::{sha256_file, write_json};
use sara_core::llmgate::GateStats;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{CliError, Command};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path, shown_as: PathBuf) -> Result<Self, CliError> {
        Ok(Self {
            path: shown_as,
            sha256: sha256_file(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    pub config_file: Option<PathBuf>,
    /// Settings given on the command line, overriding file and defaults.
    pub flag_overrides: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub started_at: String,
    pub finished_at: String,
    pub backend: Option<String>,
    pub gate: Option<GateStats>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn file_name(command: &Command) -> String {
        format!("manifests/{}.json", command.name())
    }

    pub fn write(&self, run_dir: &Path) -> Result<PathBuf, CliError> {
        let path = run_dir.join(Self::file_name(&self.command));
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::MissingInput(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
