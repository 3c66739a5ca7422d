#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub const BIN: &str = env!("CARGO_BIN_EXE_exotherm");

pub struct Run {
    pub code: i32,
    pub dir: PathBuf,
    pub stderr: String,
}

impl Run {
    pub fn manifest(&self) -> Value {
        let text = fs::read_to_string(self.dir.join("manifest.json")).expect("manifest written");
        serde_json::from_str(&text).unwrap()
    }

    pub fn csv(&self, name: &str) -> Table {
        Table::parse(&fs::read_to_string(self.dir.join(name)).unwrap())
    }
}

/// Runs the binary with `--out dir` appended.
pub fn exotherm(args: &[&str], dir: &Path) -> Run {
    let out = Command::new(BIN)
        .args(args)
        .arg("--out")
        .arg(dir)
        .env_remove("EXOTHERM_OUTPUT_DIR")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        dir: dir.to_path_buf(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Self {
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("").split(',').map(String::from).collect();
        let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
        Self { header, rows }
    }

    pub fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
    }

    pub fn text(&self, name: &str) -> Vec<&str> {
        let c = self.col(name);
        self.rows.iter().map(|r| r[c].as_str()).collect()
    }

    pub fn num(&self, name: &str) -> Vec<f64> {
        self.text(name).iter().map(|v| v.parse().unwrap()).collect()
    }
}

/// Every file listed in the manifest, with its bytes.
pub fn outputs(run: &Run) -> Vec<(String, Vec<u8>)> {
    run.manifest()["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            let name = o["path"].as_str().unwrap().to_string();
            let bytes = fs::read(run.dir.join(&name)).unwrap();
            (name, bytes)
        })
        .collect()
}
