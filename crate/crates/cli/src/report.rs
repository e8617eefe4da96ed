//! Tabular reports rendered as JSON (`{"rows": [...]}`) or CSV.
//!
//! Non-finite numbers are written as the strings `"inf"`, `"-inf"`, `"nan"`.
//! CSV numbers carry 17 significant digits; JSON numbers use the shortest
//! representation that round-trips.

use std::io::Write;

use anyhow::Result;
use serde_json::{Map, Value};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
    List(Vec<f64>),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

fn nonfinite_label(x: f64) -> &'static str {
    if x.is_nan() {
        "nan"
    } else if x > 0.0 {
        "inf"
    } else {
        "-inf"
    }
}

pub fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(nonfinite_label(x).into()), Value::Number)
}

pub fn csv_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        nonfinite_label(x).to_string()
    }
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Num(x) => json_number(*x),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::List(v) => Value::Array(v.iter().map(|x| json_number(*x)).collect()),
            Cell::Empty => Value::Null,
        }
    }

    fn to_csv(&self) -> String {
        match self {
            Cell::Num(x) => csv_number(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::List(v) => v.iter().map(|x| csv_number(*x)).collect::<Vec<_>>().join(";"),
            Cell::Empty => String::new(),
        }
    }
}

/// One output row: named cells in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Row(pub Vec<(String, Cell)>);

impl Row {
    pub fn new() -> Self {
        Row(Vec::new())
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<Cell>) -> &mut Self {
        let key = key.into();
        let value = value.into();
        match self.0.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.0.push((key, value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&Cell> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), v.to_json())).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// A complete report: rows plus top-level metadata.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub timestamp: Option<u64>,
    pub meta: Vec<(String, Value)>,
    pub rows: Vec<Row>,
}

impl Report {
    pub fn new(command: &str, timestamp: Option<u64>) -> Self {
        Report {
            command: command.to_string(),
            timestamp,
            ..Default::default()
        }
    }

    pub fn to_json(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("command".into(), Value::String(self.command.clone()));
        if let Some(t) = self.timestamp {
            obj.insert("generated_unix".into(), Value::from(t));
        }
        for (k, v) in &self.meta {
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("rows".into(), Value::Array(self.rows.iter().map(Row::to_json).collect()));
        Value::Object(obj)
    }

    fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for row in &self.rows {
            for (k, _) in &row.0 {
                if !cols.contains(k) {
                    cols.push(k.clone());
                }
            }
        }
        cols
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                writeln!(out)?;
            }
            Format::Csv => {
                if let Some(t) = self.timestamp {
                    writeln!(out, "# generated_unix {t}")?;
                }
                let cols = self.columns();
                let mut w = csv::Writer::from_writer(&mut *out);
                w.write_record(&cols)?;
                for row in &self.rows {
                    w.write_record(cols.iter().map(|c| row.get(c).map_or(String::new(), Cell::to_csv)))?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        let x = 0.1 + 0.2;
        assert_eq!(csv_number(x).parse::<f64>().unwrap(), x);
        assert_eq!(json_number(f64::INFINITY), Value::String("inf".into()));
        let v: f64 = serde_json::from_str(&json_number(x).to_string()).unwrap();
        assert_eq!(v, x);
    }

    #[test]
    fn csv_unions_columns_and_quotes() {
        let mut r = Report::new("t", None);
        let mut a = Row::new();
        a.set("id", "x,y").set("v", 1.0);
        let mut b = Row::new();
        b.set("id", "z").set("w", true);
        r.rows = vec![a, b];
        let mut buf = Vec::new();
        r.write(Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "id,v,w\n\"x,y\",1.0000000000000000e0,\nz,,true\n");
    }
}
