//! Artifact files: CSV tables with unit-carrying headers and JSON documents.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{IsacError, Result};

fn io(path: &Path, e: impl std::fmt::Display) -> IsacError {
    IsacError::Io(format!("{}: {e}", path.display()))
}

/// Column-oriented table of numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Values are written in shortest round-trip form.
    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| IsacError::Io(e.to_string());
        w.write_record(&self.header).map_err(err)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v}"))).map_err(err)?;
        }
        let bytes = w.into_inner().map_err(|e| IsacError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| IsacError::Io(e.to_string()))
    }
}

/// Single owner of an output directory.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    /// Creates `dir`; a non-empty existing directory is refused unless `overwrite`.
    pub fn create(dir: &Path, overwrite: bool) -> Result<Self> {
        if dir.exists() {
            let mut entries = fs::read_dir(dir).map_err(|e| io(dir, e))?;
            if entries.next().is_some() && !overwrite {
                return Err(IsacError::Io(format!(
                    "{}: output directory is not empty (pass --overwrite to replace its files)",
                    dir.display()
                )));
            }
        } else {
            fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        }
        Ok(ArtifactWriter {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let text = table.to_csv_string()?;
        self.put(name, text.as_bytes())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| IsacError::Io(e.to_string()))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        self.put(name, bytes)
    }
}
