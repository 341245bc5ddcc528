//! CSV/JSON sinks shared by all experiments.
//!
//! Rows are buffered in grid order and written through a single serialized
//! writer, so output bytes are independent of the worker thread count.
//! Wall-clock columns are always last, letting consumers strip timing
//! without knowing the schema.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::CliError;

/// Buffered CSV table with a fixed header; `wall_ms` is appended as the
/// final column of every row.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(mut header: Vec<&'static str>) -> Self {
        header.push("wall_ms");
        Table {
            header,
            rows: Vec::new(),
        }
    }

    /// Appends one row; `started` marks when work on this grid point began.
    pub fn push(&mut self, mut fields: Vec<String>, started: Instant) {
        assert_eq!(fields.len() + 1, self.header.len(), "row/header mismatch");
        fields.push(format!("{:.3}", started.elapsed().as_secs_f64() * 1e3));
        self.rows.push(fields);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)
            .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))?;
        w.write_record(&self.header)
            .and_then(|_| self.rows.iter().try_for_each(|r| w.write_record(r)))
            .and_then(|_| w.flush().map_err(Into::into))
            .map_err(|e| CliError::Other(format!("csv write failed: {e}")))
    }
}

/// Shortest round-trip decimal form; deterministic for a given f64.
pub fn fnum(v: f64) -> String {
    format!("{v}")
}

/// The JSON summary lives next to the CSV: `foo.csv` -> `foo.json`.
pub fn summary_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

pub fn write_summary(out: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let path = summary_path(out);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Other(format!("summary serialization failed: {e}")))?;
    std::fs::write(&path, text + "\n")
        .map_err(|e| CliError::Other(format!("cannot write {}: {e}", path.display())))
}
