//! Tables rendered as CSV or as a JSON document `{meta, rows}`.
//!
//! Reals are printed with 15 significant digits in scientific notation so
//! that identical inputs give byte-identical output.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn opt_real(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Real)
    }

    fn csv(&self) -> String {
        match self {
            Cell::Real(x) => real(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            // Round-tripping through the printed form keeps CSV and JSON in step.
            Cell::Real(x) if x.is_finite() => json!(real(*x).parse::<f64>().expect("formatted real")),
            Cell::Real(x) => json!(x.to_string()),
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
            Cell::Bool(b) => json!(b),
            Cell::Empty => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(i64::try_from(n).expect("row index fits in i64"))
    }
}

impl From<u32> for Cell {
    fn from(n: u32) -> Self {
        Cell::Int(i64::from(n))
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

/// 15 significant digits.
pub fn real(x: f64) -> String {
    if x == 0.0 {
        // Avoid "-0" so that signed zeros print alike.
        return "0.00000000000000e0".to_owned();
    }
    format!("{x:.14e}")
}

#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write<W: Write, C: Serialize>(
        &self,
        out: W,
        format: Format,
        command: &str,
        config: &C,
    ) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out, command, config),
        }
    }

    fn write_csv<W: Write>(&self, out: W) -> Result<(), CliError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        writer.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::csv)).map_err(io)?;
        }
        writer.flush().map_err(|e| CliError::Internal(e.to_string()))
    }

    fn write_json<W: Write, C: Serialize>(&self, mut out: W, command: &str, config: &C) -> Result<(), CliError> {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let object: Map<String, Value> =
                    self.columns.iter().zip(row).map(|(c, cell)| ((*c).to_owned(), cell.json())).collect();
                Value::Object(object)
            })
            .collect();
        let document = json!({
            "meta": {
                "command": command,
                "version": env!("CARGO_PKG_VERSION"),
                "config": config,
                "columns": self.columns,
            },
            "rows": rows,
        });
        serde_json::to_writer_pretty(&mut out, &document).map_err(|e| CliError::Internal(e.to_string()))?;
        writeln!(out).map_err(|e| CliError::Internal(e.to_string()))
    }
}

fn io(e: csv::Error) -> CliError {
    CliError::Internal(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_have_fifteen_significant_digits() {
        assert_eq!(real(-0.2), "-2.00000000000000e-1");
        assert_eq!(real(1.0 / 3.0), "3.33333333333333e-1");
        assert_eq!(real(-0.0), real(0.0));
    }

    #[test]
    fn csv_has_header_and_lf_endings() {
        let mut table = Table::new(&["a", "b", "c"]);
        table.push(vec![Cell::Real(1.5), Cell::text("x,y"), Cell::Empty]);
        let mut buf = Vec::new();
        table.write(&mut buf, Format::Csv, "test", &()).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "a,b,c\n1.50000000000000e0,\"x,y\",\n");
    }

    #[test]
    fn json_envelope() {
        let mut table = Table::new(&["energy", "sector"]);
        table.push(vec![Cell::Real(0.1), Cell::text("plus")]);
        let mut buf = Vec::new();
        table.write(&mut buf, Format::Json, "spectrum", &json!({"g": 0.2})).unwrap();
        let doc: Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(doc["meta"]["command"], "spectrum");
        assert_eq!(doc["meta"]["config"]["g"], 0.2);
        assert_eq!(doc["rows"][0]["energy"], 0.1);
        assert_eq!(doc["rows"][0]["sector"], "plus");
    }
}
