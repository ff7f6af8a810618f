//! Artifact writing. Every file goes through [`Outputs`], which remembers what it
//! created so a failed run can be rolled back.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::RunError;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

pub struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, RunError> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        Ok(Outputs { dir: dir.to_path_buf(), created_dir, written: Vec::new() })
    }

    pub fn files(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
            .collect()
    }

    fn target(&mut self, name: &str) -> PathBuf {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        path
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let path = self.target(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Internal(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| RunError::io(&path, e))
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), RunError> {
        let path = self.target(name);
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(err) => RunError::io(&path, err),
            other => RunError::Internal(format!("{other:?}")),
        };
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(&path).map_err(io)?;
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| RunError::io(&path, e))
    }

    /// Removes everything written so far, and the directory if this run created it.
    pub fn roll_back(self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}
