//! Result emission as JSON, CSV or an aligned text table.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Missing,
}

/// Rounds to 12 significant digits; the result prints in its shortest
/// round-trip form.
pub fn round12(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().unwrap_or(v)
}

impl Cell {
    fn to_json(&self) -> Value {
        match self {
            Cell::Num(v) => serde_json::Number::from_f64(round12(*v)).map_or(Value::Null, Value::Number),
            Cell::Int(v) => Value::from(*v),
            Cell::Text(s) => Value::from(s.clone()),
            Cell::Missing => Value::Null,
        }
    }

    fn to_text(&self) -> String {
        match self {
            Cell::Num(v) => round12(*v).to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

/// Rounds every float inside a JSON value.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

pub struct Report {
    pub config: Value,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra top-level JSON fields.
    pub summary: Option<Value>,
    /// Overrides the generic table rendering.
    pub table: Option<String>,
}

impl Report {
    pub fn new(config: Value, columns: Vec<&'static str>) -> Self {
        Self {
            config,
            columns,
            rows: Vec::new(),
            summary: None,
            table: None,
        }
    }

    /// Drops columns that are missing in every row.
    pub fn prune(mut self) -> Self {
        let keep: Vec<bool> = (0..self.columns.len())
            .map(|c| self.rows.iter().any(|r| r[c] != Cell::Missing))
            .collect();
        let filter = |v: Vec<Cell>| -> Vec<Cell> { v.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect() };
        self.columns = self.columns.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(c, _)| c).collect();
        self.rows = self.rows.into_iter().map(filter).collect();
        self
    }

    pub fn to_json(&self) -> Value {
        let results: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(r)
                    .map(|(c, v)| (c.to_string(), v.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut top = Map::new();
        top.insert("config".into(), round_json(self.config.clone()));
        top.insert("results".into(), Value::Array(results));
        if let Some(s) = &self.summary {
            top.insert("summary".into(), round_json(s.clone()));
        }
        Value::Object(top)
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut out = serde_json::to_vec_pretty(&self.to_json())?;
                out.push(b'\n');
                Ok(out)
            }
            Format::Csv => {
                let mut wtr = csv::Writer::from_writer(Vec::new());
                wtr.write_record(&self.columns)?;
                for r in &self.rows {
                    wtr.write_record(r.iter().map(Cell::to_text))?;
                }
                Ok(wtr.into_inner().context("flushing csv output")?)
            }
            Format::Table => Ok(match &self.table {
                Some(t) => t.clone().into_bytes(),
                None => text_table(&self.columns, &self.rows).into_bytes(),
            }),
        }
    }
}

fn text_table(columns: &[&str], rows: &[Vec<Cell>]) -> String {
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Num(v) => format!("{v:.6}"),
                    other => other.to_text(),
                })
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..columns.len())
        .map(|c| cells.iter().map(|r| r[c].len()).chain([columns[c].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    let mut line = |parts: Vec<&str>| {
        let padded: Vec<String> = parts.iter().zip(&widths).map(|(p, w)| format!("{p:>w$}")).collect();
        out.push_str(&padded.join("  "));
        out.push('\n');
    };
    line(columns.to_vec());
    for r in &cells {
        line(r.iter().map(String::as_str).collect());
    }
    out
}

/// Writes to a sibling temporary file and renames it into place, so a
/// failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}
