//! Minimal CSV writing and reading for the metric and scan tables.
//!
//! All files use a header row, '.' decimal separators, '\n' line endings
//! and UTF-8. Floats are written with Rust's shortest round-trip
//! formatting, so re-reading reproduces the exact f64 bits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::Result;

/// One cell: everything is kept as text; numeric columns parse on demand.
pub type Row = Vec<String>;

pub fn format_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

/// Write a table; `columns` becomes the header row.
pub fn write_csv(path: &Path, columns: &[&str], rows: &[Row]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let mut first = true;
        for cell in row {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{cell}");
            first = false;
        }
        out.push('\n');
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, out.as_bytes())?;
    Ok(())
}

/// Parsed CSV: header names plus text rows.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl CsvTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// One column as f64; unparseable cells become NaN.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("no column named {name}")))?;
        Ok(self
            .rows
            .iter()
            .map(|r| r[idx].parse::<f64>().unwrap_or(f64::NAN))
            .collect())
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::invalid("empty CSV"))?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Row = line.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != columns.len() {
            return Err(Error::invalid(format!(
                "row {} has {} cells, header has {}",
                i + 2,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(CsvTable { columns, rows })
}
