//! Output emission: aligned tables at 6 significant digits, JSON and CSV at
//! full precision, LF line endings throughout.

use clap::ValueEnum;
use serde_json::{json, Value};
use std::io::{self, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Table,
    Json,
    Csv,
}

/// One named value carrying both its table rendering and its JSON form.
#[derive(Debug, Clone)]
pub struct Row {
    pub key: String,
    pub table: String,
    pub csv: String,
    pub json: Value,
}

impl Row {
    pub fn count(key: &str, value: u64) -> Self {
        Row {
            key: key.to_string(),
            table: value.to_string(),
            csv: value.to_string(),
            json: json!(value),
        }
    }

    pub fn real(key: &str, value: f64) -> Self {
        Row {
            key: key.to_string(),
            table: sig6(value),
            csv: format!("{value}"),
            json: json!(value),
        }
    }

    pub fn flag(key: &str, value: bool) -> Self {
        Row {
            key: key.to_string(),
            table: value.to_string(),
            csv: value.to_string(),
            json: json!(value),
        }
    }

    pub fn text(key: &str, value: &str) -> Self {
        Row {
            key: key.to_string(),
            table: value.to_string(),
            csv: value.to_string(),
            json: json!(value),
        }
    }

    pub fn null(key: &str) -> Self {
        Row {
            key: key.to_string(),
            table: "none".to_string(),
            csv: String::new(),
            json: Value::Null,
        }
    }
}

/// Format with 6 significant digits, plain decimal where readable and
/// scientific outside `[1e-4, 1e6)`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exponent) {
        format!("{:.*}", (5 - exponent).max(0) as usize, x)
    } else {
        format!("{:.5e}", x)
    }
}

/// Sectioned key/value table.
pub struct Table {
    lines: Vec<(String, String)>,
    notes: Vec<String>,
}

impl Table {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        Table {
            lines: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn section(&mut self, title: &str, rows: Vec<Row>) {
        self.lines.push((format!("[{title}]"), String::new()));
        for row in rows {
            self.lines.push((format!("  {}", row.key), row.table));
        }
    }

    pub fn note(&mut self, text: &str) {
        self.notes.push(text.to_string());
    }

    pub fn write<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let width = self.lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (key, value) in &self.lines {
            if value.is_empty() {
                writeln!(out, "{key}")?;
            } else {
                writeln!(out, "{key:<width$}  {value}")?;
            }
        }
        for note in &self.notes {
            writeln!(out, "note: {note}")?;
        }
        Ok(())
    }
}

pub fn write_csv_header<W: Write>(out: &mut W, columns: &[&str]) -> io::Result<()> {
    writeln!(out, "{}", columns.join(","))
}

pub fn write_csv_values<W: Write>(out: &mut W, rows: &[Row]) -> io::Result<()> {
    let values: Vec<&str> = rows.iter().map(|r| r.csv.as_str()).collect();
    writeln!(out, "{}", values.join(","))
}

/// Header plus one value row, for commands whose CSV output is a single record.
pub fn write_csv_row<W: Write>(out: &mut W, rows: &[Row]) -> io::Result<()> {
    let keys: Vec<&str> = rows.iter().map(|r| r.key.as_str()).collect();
    write_csv_header(out, &keys)?;
    write_csv_values(out, rows)
}

/// Column-aligned listing for multi-row table output.
pub fn write_aligned_grid<W, I>(out: &mut W, header: &[&str], rows: I) -> io::Result<()>
where
    W: Write,
    I: Iterator<Item = Vec<String>>,
{
    let rows: Vec<Vec<String>> = rows.collect();
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut line = String::new();
    for (i, h) in header.iter().enumerate() {
        line.push_str(&format!("{:>width$}  ", h, width = widths[i]));
    }
    writeln!(out, "{}", line.trim_end())?;
    for row in &rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            line.push_str(&format!("{:>width$}  ", cell, width = widths[i]));
        }
        writeln!(out, "{}", line.trim_end())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_spans_magnitudes() {
        assert_eq!(sig6(0.376648), "0.376648");
        assert_eq!(sig6(376648.0), "376648");
        assert_eq!(sig6(0.0057578195), "0.00575782");
        assert_eq!(sig6(1_497_548.0), "1.49755e6");
        assert_eq!(sig6(1e-9), "1.00000e-9");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-0.25), "-0.250000");
    }

    #[test]
    fn csv_rows_are_comma_joined_lf() {
        let mut out = Vec::new();
        write_csv_row(&mut out, &[Row::count("a", 1), Row::real("b", 0.5)]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "a,b\n1,0.5\n");
    }
}
