//! Plain CSV emission with a fixed numeric format.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

/// Twelve significant digits in scientific notation; identical input gives identical text.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0.00000000000e0".
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

/// A CSV file with a single header row.
pub struct CsvFile {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvFile {
    pub fn create(path: &Path, header: &str) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{header}").map_err(|e| Error::io(path, e))?;
        Ok(CsvFile {
            path: path.to_path_buf(),
            out,
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        let line = values.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(",");
        writeln!(self.out, "{line}").map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}
