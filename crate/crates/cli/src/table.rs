//! Result tables with CSV and JSON writers that agree cell for cell.
//!
//! Both writers go through [`Cell::render`]: floats use the shortest
//! round-trip form, non-finite floats become the strings `inf`, `-inf` and
//! `NaN`, and a missing value is a blank CSV field or a JSON `null`.

use std::io::Write;

use clap::ValueEnum;
use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Null,
    Bool(bool),
    UInt(u64),
    Float(f64),
    Text(String),
}

fn float_text(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        Number::from_f64(x).expect("finite").to_string()
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Bool(b) => b.to_string(),
            Cell::UInt(u) => u.to_string(),
            Cell::Float(x) => float_text(*x),
            Cell::Text(s) => s.clone(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Null => Value::Null,
            Cell::Bool(b) => Value::Bool(*b),
            Cell::UInt(u) => Value::from(*u),
            Cell::Float(x) => Number::from_f64(*x).map_or_else(|| Value::String(float_text(*x)), Value::Number),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::UInt(u) => Some(*u as f64),
            Cell::Float(x) => Some(*x),
            _ => None,
        }
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<u64> for Cell {
    fn from(u: u64) -> Self {
        Cell::UInt(u)
    }
}

impl From<u32> for Cell {
    fn from(u: u32) -> Self {
        Cell::UInt(u.into())
    }
}

impl From<usize> for Cell {
    fn from(u: usize) -> Self {
        Cell::UInt(u as u64)
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Null, Into::into)
    }
}

/// One row as `(column, value)` pairs.
pub type Record = Vec<(&'static str, Cell)>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    /// Columns in order of first appearance; absent cells are null.
    pub fn from_records(records: Vec<Record>) -> Self {
        let mut columns: Vec<String> = Vec::new();
        for r in &records {
            for (name, _) in r {
                if !columns.iter().any(|c| c == name) {
                    columns.push(name.to_string());
                }
            }
        }
        let rows = records
            .into_iter()
            .map(|mut r| {
                columns
                    .iter()
                    .map(|c| match r.iter().position(|(name, _)| name == c) {
                        Some(i) => r.swap_remove(i).1,
                        None => Cell::Null,
                    })
                    .collect()
            })
            .collect();
        Self { columns, rows }
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Every cell of one column, top to bottom.
    pub fn values(&self, name: &str) -> Vec<&Cell> {
        match self.column(name) {
            Some(i) => self.rows.iter().map(|r| &r[i]).collect(),
            None => Vec::new(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::to_json)).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.to_json())?;
        writeln!(out)
    }

    pub fn write<W: Write>(&self, out: W, format: Format) -> crate::Result<()> {
        match format {
            Format::Csv => self.write_csv(out)?,
            Format::Json => self.write_json(out)?,
        }
        Ok(())
    }
}
