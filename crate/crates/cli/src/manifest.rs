//! Output directory bookkeeping and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    /// Data rows, header excluded.
    pub rows: usize,
    pub bytes: usize,
    pub description: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    Runaway,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub command: String,
    pub arguments: Vec<String>,
    pub status: Status,
    pub exit_code: u8,
    /// Set when the command failed after writing some outputs.
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub source: String,
    /// Self-contained configuration; pass the manifest to `--config` to
    /// repeat the run.
    pub resolved: RunConfig,
    pub tolerances: BTreeMap<String, f64>,
    pub outputs: Vec<OutputFile>,
    pub summary: Value,
    pub diagnostics: Vec<String>,
    pub wall_time_seconds: f64,
}

/// Files written into one output directory.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    pub files: Vec<OutputFile>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Renders a CSV in memory and writes it in one go.
    pub fn csv<F>(&mut self, name: &str, description: &str, render: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> io::Result<()>,
    {
        let mut buf = Vec::new();
        render(&mut buf).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        let path = self.dir.join(name);
        fs::write(&path, &buf).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let lines = buf.iter().filter(|&&b| b == b'\n').count();
        self.files.push(OutputFile {
            path: name.to_string(),
            rows: lines.saturating_sub(1),
            bytes: buf.len(),
            description: description.to_string(),
        });
        Ok(())
    }

    pub fn write_manifest(&self, m: &RunManifest) -> Result<PathBuf, CliError> {
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(m).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_exclude_header() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Output::create(&dir.path().join("nested")).unwrap();
        out.csv("a.csv", "test", |w| {
            use std::io::Write;
            writeln!(w, "h")?;
            writeln!(w, "1")?;
            writeln!(w, "2")
        })
        .unwrap();
        assert_eq!(out.files[0].rows, 2);
        assert_eq!(fs::read_to_string(out.dir().join("a.csv")).unwrap(), "h\n1\n2\n");
    }
}
