//! Output directories and CSV/JSON writers.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reruns of
//! the same configuration produce byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Environment variable naming the root of all output directories.
pub const OUTPUT_ROOT_VAR: &str = "KINKS_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("kinks-out"))
}

/// Formats a float for CSV: shortest representation that round-trips, with
/// an exponent for very large or small magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone)]
pub struct OutputDir {
    path: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        fs::create_dir_all(&path).with_context(|| format!("creating output directory {}", path.display()))?;
        Ok(Self { path, written: Vec::new() })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let file = self.path.join(name);
        let mut w = csv::Writer::from_path(&file).with_context(|| format!("opening {}", file.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.into_iter().collect::<Vec<_>>())?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Numeric CSV: every cell is a float.
    pub fn write_table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.write_csv(name, header, rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>()))
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        // Round-trip through `Value` so object keys come out sorted.
        let value = serde_json::to_value(value)?;
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        let file = self.path.join(name);
        fs::write(&file, text).with_context(|| format!("writing {}", file.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }
}
