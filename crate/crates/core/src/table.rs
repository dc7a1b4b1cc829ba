//! Column tables written as CSV with a `#` metadata preamble.
//!
//! ```text
//! # command=fig1
//! # seed=1
//! q0,gamma_mc,...
//! 32,2.87,...
//! # summary slope_diff21=-1.99
//! ```
//!
//! Floats are written in the shortest form that parses back to the same
//! bits, so a written table re-reads exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Float(Vec<f64>),
    Text(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Float(v) => v.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, i: usize) -> String {
        match self {
            Column::Float(v) => v[i].to_string(),
            Column::Text(v) => v[i].clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepTable {
    names: Vec<String>,
    columns: Vec<Column>,
    metadata: Vec<(String, String)>,
    summary: Vec<(String, String)>,
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

impl SweepTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Column::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn push_column(&mut self, name: &str, col: Column) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::invalid(format!("duplicate column {name:?}")));
        }
        if !self.columns.is_empty() && col.len() != self.len() {
            return Err(Error::invalid(format!(
                "column {name:?} has {} rows, table has {}",
                col.len(),
                self.len()
            )));
        }
        self.names.push(name.to_string());
        self.columns.push(col);
        Ok(())
    }

    pub fn add_float(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        self.push_column(name, Column::Float(values))
    }

    pub fn add_text(&mut self, name: &str, values: Vec<String>) -> Result<()> {
        self.push_column(name, Column::Text(values))
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.names.iter().position(|n| n == name).map(|i| &self.columns[i])
    }

    pub fn floats(&self, name: &str) -> Option<&[f64]> {
        match self.column(name)? {
            Column::Float(v) => Some(v),
            Column::Text(_) => None,
        }
    }

    pub fn texts(&self, name: &str) -> Option<&[String]> {
        match self.column(name)? {
            Column::Text(v) => Some(v),
            Column::Float(_) => None,
        }
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), one_line(&value.to_string())));
    }

    pub fn push_summary(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), one_line(&value.to_string())));
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn summary(&self) -> &[(String, String)] {
        &self.summary
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.to_csv_string()?.as_bytes())?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv_string()?)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.names)?;
        for i in 0..self.len() {
            w.write_record(self.columns.iter().map(|c| c.cell(i)))?;
        }
        let body = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Csv(e.to_string()))?);
        for (k, v) in &self.summary {
            out.push_str(&format!("# summary {k}={v}\n"));
        }
        Ok(out)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Parse a table written by [`SweepTable::to_csv_string`]. Columns whose
    /// cells all parse as numbers come back as floats.
    pub fn parse(text: &str) -> Result<Self> {
        let mut table = SweepTable::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                let (target, kv) = match rest.strip_prefix("summary ") {
                    Some(kv) => (&mut table.summary, kv),
                    None => (&mut table.metadata, rest),
                };
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Csv(format!("bad comment line {line:?}")))?;
                target.push((k.to_string(), v.to_string()));
            } else if !line.is_empty() {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut cells: Vec<Vec<String>> = vec![Vec::new(); names.len()];
        for rec in r.records() {
            let rec = rec?;
            for (col, v) in cells.iter_mut().zip(rec.iter()) {
                col.push(v.to_string());
            }
        }
        for (name, col) in names.iter().zip(cells) {
            let parsed: Option<Vec<f64>> = col.iter().map(|c| c.parse().ok()).collect();
            match parsed {
                Some(v) => table.add_float(name, v)?,
                None => table.add_text(name, col)?,
            }
        }
        Ok(table)
    }
}
