use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub description: String,
    /// CSV columns in file order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<Column>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_fingerprint: String,
    pub files: Vec<FileEntry>,
}

/// One stage's output directory plus the manifest being built for it.
pub struct StageDir {
    pub dir: PathBuf,
    manifest: Manifest,
}

impl StageDir {
    pub fn create(root: &Path, name: &str, command: &str, seed: u64, fingerprint: String) -> Result<Self> {
        let dir = root.join(name);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(StageDir {
            dir,
            manifest: Manifest {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                seed,
                config_fingerprint: fingerprint,
                files: Vec::new(),
            },
        })
    }

    fn record(&mut self, name: &str, description: &str, columns: Vec<(String, String)>) {
        self.manifest.files.push(FileEntry {
            path: name.into(),
            description: description.into(),
            columns: columns.into_iter().map(|(name, unit)| Column { name, unit }).collect(),
        });
    }

    pub fn write_csv<F>(
        &mut self,
        name: &str,
        description: &str,
        columns: Vec<(String, String)>,
        body: F,
    ) -> Result<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> hydrarm_core::error::Result<()>,
    {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush()?;
        self.record(name, description, columns);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, description: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        write_json_file(&path, value)?;
        self.record(name, description, Vec::new());
        Ok(path)
    }

    pub fn write_text(&mut self, name: &str, description: &str, text: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.record(name, description, Vec::new());
        Ok(path)
    }

    pub fn finish(self) -> Result<PathBuf> {
        let path = self.dir.join(MANIFEST);
        write_json_file(&path, &self.manifest)?;
        Ok(self.dir)
    }
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json_file<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn joint_columns(prefix: &str, unit: &str, n: usize) -> Vec<(String, String)> {
    (1..=n).map(|i| (format!("{prefix}{i}"), unit.to_string())).collect()
}

pub fn columns(spec: &[(&str, &str)]) -> Vec<(String, String)> {
    spec.iter().map(|(c, u)| (c.to_string(), u.to_string())).collect()
}
