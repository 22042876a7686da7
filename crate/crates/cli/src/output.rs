//! Output tables, atomic file writes and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Num(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Num(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Num(v) => v[i].to_string(),
            Column::Text(v) => v[i].clone(),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        match self {
            Column::Num(v) => serde_json::json!(v),
            Column::Text(v) => serde_json::json!(v),
        }
    }
}

/// Column-oriented data written as CSV or as a JSON object of arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub stem: String,
    pub columns: Vec<(String, Column)>,
}

impl Table {
    pub fn new(stem: &str) -> Self {
        Self {
            stem: stem.to_owned(),
            columns: Vec::new(),
        }
    }

    pub fn num(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_owned(), Column::Num(values)));
        self
    }

    pub fn text(mut self, name: &str, values: Vec<String>) -> Self {
        self.columns.push((name.to_owned(), Column::Text(values)));
        self
    }

    pub fn header(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |(_, c)| c.len())
    }

    fn csv_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).map_err(CliError::runtime)?;
        for i in 0..self.rows() {
            w.write_record(self.columns.iter().map(|(_, c)| c.cell(i)))
                .map_err(CliError::runtime)?;
        }
        w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
    }

    fn json_bytes(&self) -> Result<Vec<u8>, CliError> {
        let mut map = serde_json::Map::new();
        for (name, col) in &self.columns {
            map.insert(name.clone(), col.to_json());
        }
        json_bytes(&serde_json::Value::Object(map))
    }

    pub fn render(&self, format: Format) -> Result<OutputFile, CliError> {
        if self.columns.iter().any(|(_, c)| c.len() != self.rows()) {
            return Err(CliError::Runtime(format!("table {} has ragged columns", self.stem)));
        }
        Ok(match format {
            Format::Csv => OutputFile::new(format!("{}.csv", self.stem), self.csv_bytes()?),
            Format::Json => OutputFile::new(format!("{}.json", self.stem), self.json_bytes()?),
        })
    }
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut v = serde_json::to_vec_pretty(value).map_err(CliError::runtime)?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn new(name: impl Into<String>, bytes: Vec<u8>) -> Self {
        Self {
            name: name.into(),
            bytes,
        }
    }

    pub fn json<T: Serialize>(name: &str, value: &T) -> Result<Self, CliError> {
        Ok(Self::new(name, json_bytes(value)?))
    }

    pub fn sha256(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

/// Writes every file to a temporary sibling first and renames only once
/// all of them are on disk.
pub fn write_atomically(dir: &Path, files: &[OutputFile]) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("creating {}: {e}", dir.display())))?;
    let mut staged = Vec::with_capacity(files.len());
    for f in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir)
            .map_err(|e| CliError::Runtime(format!("staging {}: {e}", f.name)))?;
        tmp.write_all(&f.bytes)
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| CliError::Runtime(format!("writing {}: {e}", f.name)))?;
        staged.push((tmp, dir.join(&f.name)));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, path) in staged {
        tmp.persist(&path)
            .map_err(|e| CliError::Runtime(format!("renaming to {}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub rng_seed: u64,
    pub threads: Option<usize>,
    pub format: Format,
    pub started_at: String,
    pub finished_at: String,
    pub warnings: Vec<String>,
    pub outputs: Vec<ManifestEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_and_json_tables() {
        let t = Table::new("x")
            .text("label", vec!["a".into(), "b".into()])
            .num("v", vec![0.1, 2.0]);
        let csv = t.render(Format::Csv).unwrap();
        assert_eq!(csv.name, "x.csv");
        assert_eq!(String::from_utf8(csv.bytes).unwrap(), "label,v\na,0.1\nb,2\n");
        let json = t.render(Format::Json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json.bytes).unwrap();
        assert_eq!(v["v"][0], 0.1);
    }

    #[test]
    fn ragged_table_rejected() {
        let t = Table::new("x").num("a", vec![1.0]).num("b", vec![]);
        assert!(t.render(Format::Csv).is_err());
    }

    #[test]
    fn atomic_write_leaves_only_final_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = vec![OutputFile::new("a.txt", b"1".to_vec()), OutputFile::new("b.txt", b"2".to_vec())];
        write_atomically(dir.path(), &files).unwrap();
        let mut names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        names.sort();
        assert_eq!(names, ["a.txt", "b.txt"]);
    }
}
