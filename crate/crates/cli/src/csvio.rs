//! CSV reading and writing for the run artifacts.
//!
//! Format: `#`-prefixed metadata lines first, then one header row, then
//! numeric rows with comma separators and dot decimals. Values are written
//! with Rust's shortest round-trip float formatting, so re-parsing a file
//! recovers every f64 bit for bit. Metadata lines are deterministic (no
//! timestamps): identical runs produce identical files.

use std::fs;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug)]
pub struct CsvTable {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn write_csv(
    path: &Path,
    metadata: &[(&str, String)],
    header: &[String],
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<(), CliError> {
    let mut out = String::new();
    for (k, v) in metadata {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<CsvTable, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut metadata = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once('=') {
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        match &header {
            None => {
                header = Some(trimmed.split(',').map(|s| s.trim().to_string()).collect());
            }
            Some(cols) => {
                let mut row = Vec::with_capacity(cols.len());
                for field in trimmed.split(',') {
                    let v: f64 = field.trim().parse().map_err(|_| CliError::Csv {
                        path: path.to_path_buf(),
                        line,
                        message: format!("`{}` is not a number", field.trim()),
                    })?;
                    row.push(v);
                }
                if row.len() != cols.len() {
                    return Err(CliError::Csv {
                        path: path.to_path_buf(),
                        line,
                        message: format!("expected {} fields, found {}", cols.len(), row.len()),
                    });
                }
                rows.push(row);
            }
        }
    }
    let header = header.ok_or_else(|| CliError::Csv {
        path: path.to_path_buf(),
        line: text.lines().count(),
        message: "missing header row".into(),
    })?;
    Ok(CsvTable { metadata, header, rows })
}
