//! Report layout and the three output formats.

use std::fmt::Write as _;

use serde_json::{json, Map, Value};

use crate::args::Format;

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub command: String,
    pub config: Map<String, Value>,
    pub notices: Vec<String>,
    pub summary: Map<String, Value>,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// some checked cell disagreed with its expected value
    pub mismatch: bool,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), ..Default::default() }
    }

    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.summary.insert(key.into(), v.into());
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.json(),
            Format::Csv => self.csv(),
            Format::Table => self.table(),
        }
    }

    fn json(&self) -> String {
        let mut doc = json!({ "command": self.command, "config": self.config });
        if !self.notices.is_empty() {
            doc["notices"] = json!(self.notices);
        }
        if !self.summary.is_empty() {
            doc["result"] = Value::Object(self.summary.clone());
        }
        if !self.headers.is_empty() {
            let rows: Vec<Value> = self
                .rows
                .iter()
                .map(|r| Value::Object(self.headers.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            doc["rows"] = Value::Array(rows);
        }
        let mut s = serde_json::to_string_pretty(&doc).expect("json values");
        s.push('\n');
        s
    }

    fn csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# {} {}", self.command, Value::Object(self.config.clone()));
        for n in &self.notices {
            let _ = writeln!(s, "# notice: {n}");
        }
        if self.headers.is_empty() {
            s.push_str("key,value\n");
            for (k, v) in &self.summary {
                let _ = writeln!(s, "{k},{}", csv_field(v));
            }
        } else {
            for (k, v) in &self.summary {
                let _ = writeln!(s, "# {k} = {}", plain(v));
            }
            s.push_str(&self.headers.join(","));
            s.push('\n');
            for r in &self.rows {
                let line: Vec<String> = r.iter().map(csv_field).collect();
                s.push_str(&line.join(","));
                s.push('\n');
            }
        }
        s
    }

    fn table(&self) -> String {
        let mut s = format!("durability {}\n", self.command);
        for (k, v) in &self.config {
            let _ = writeln!(s, "  {k} = {}", plain(v));
        }
        for n in &self.notices {
            let _ = writeln!(s, "notice: {n}");
        }
        if !self.summary.is_empty() {
            s.push('\n');
            let width = self.summary.keys().map(|k| k.len()).max().unwrap_or(0);
            for (k, v) in &self.summary {
                let _ = writeln!(s, "{k:<width$}  {}", plain(v));
            }
        }
        if !self.headers.is_empty() {
            s.push('\n');
            let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(plain).collect()).collect();
            let widths: Vec<usize> = (0..self.headers.len())
                .map(|i| cells.iter().map(|r| r[i].len()).chain([self.headers[i].len()]).max().unwrap_or(0))
                .collect();
            let line = |items: &[String]| {
                let padded: Vec<String> = items.iter().zip(&widths).map(|(v, w)| format!("{v:<w$}")).collect();
                padded.join("  ").trim_end().to_string()
            };
            let _ = writeln!(s, "{}", line(&self.headers));
            for r in &cells {
                let _ = writeln!(s, "{}", line(r));
            }
        }
        s
    }
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

fn csv_field(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        other => plain(other),
    }
}
