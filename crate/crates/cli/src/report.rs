use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

/// Everything a command prints, in one schema-stable shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    /// SHA-256 of the canonical circuit text.
    pub circuit_digest: String,
    pub parameters: Map<String, Value>,
    pub tolerances: Map<String, Value>,
    /// Probability mass dropped by Fock truncation, when the oracle ran.
    pub truncation_tail: Option<f64>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub passed: bool,
    pub wall_time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

pub fn digest(canonical: &str) -> String {
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Finite floats become JSON numbers, anything else `null`.
pub fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

impl Report {
    pub fn new(command: &str, circuit_digest: String, columns: &[&str]) -> Self {
        Self {
            schema: SCHEMA,
            command: command.to_string(),
            circuit_digest,
            parameters: Map::new(),
            tolerances: Map::new(),
            truncation_tail: None,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            passed: true,
            wall_time_s: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn tolerance(&mut self, key: &str, value: f64) -> &mut Self {
        self.tolerances.insert(key.to_string(), num(value));
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Records the largest truncation tail seen so far.
    pub fn note_tail(&mut self, tail: f64) {
        self.truncation_tail = Some(self.truncation_tail.map_or(tail, |t| t.max(tail)));
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            Format::Csv => self.render_csv(),
            Format::Table => self.render_table(),
        }
    }

    fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(cell)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {} (schema {})", self.command, self.schema);
        let _ = writeln!(out, "# circuit sha256: {}", self.circuit_digest);
        for (k, v) in &self.parameters {
            let _ = writeln!(out, "# {k}: {}", cell(v));
        }
        for (k, v) in &self.tolerances {
            let _ = writeln!(out, "# tolerance {k}: {}", cell(v));
        }
        if let Some(t) = self.truncation_tail {
            let _ = writeln!(out, "# truncation tail: {t:e}");
        }
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(cell).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |items: &[String]| -> String {
            let padded: Vec<String> = items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
            padded.join("  ").trim_end().to_string()
        };
        let _ = writeln!(out, "{}", line(&self.columns));
        for r in &cells {
            let _ = writeln!(out, "{}", line(r));
        }
        let _ = writeln!(out, "# {} in {:.3}s", if self.passed { "ok" } else { "FAILED" }, self.wall_time_s);
        out
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}
