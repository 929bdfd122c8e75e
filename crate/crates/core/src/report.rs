//! Report emission: tab-delimited tables or JSON lines.

use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{Map, Value};

/// Version tag written into every record line.
pub const SCHEMA: &str = "cvxtau.report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Records,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub title: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(title: impl Into<String>, headers: &[&str]) -> Self {
        Table { title: title.into(), headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }
}

/// Everything a command emits.
#[derive(Debug, Clone, Default)]
pub struct Report {
    command: String,
    tables: Vec<Table>,
    records: Vec<Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { command: command.into(), ..Default::default() }
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(t);
    }

    /// Adds one record line of type `record` built from `body`'s fields.
    pub fn record<T: Serialize>(&mut self, record: &str, body: &T) {
        let mut obj = Map::new();
        obj.insert("schema".into(), Value::from(SCHEMA));
        obj.insert("command".into(), Value::from(self.command.clone()));
        obj.insert("record".into(), Value::from(record));
        match serde_json::to_value(body).expect("report bodies serialize") {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("value".into(), other);
            }
        }
        self.records.push(Value::Object(obj));
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        match format {
            Format::Records => {
                for r in &self.records {
                    out.push_str(&serde_json::to_string(r).expect("json"));
                    out.push('\n');
                }
            }
            Format::Table => {
                for (i, t) in self.tables.iter().enumerate() {
                    if i > 0 {
                        out.push('\n');
                    }
                    let _ = writeln!(out, "# {}", t.title);
                    out.push_str(&t.headers.join("\t"));
                    out.push('\n');
                    for row in &t.rows {
                        out.push_str(&row.join("\t"));
                        out.push('\n');
                    }
                }
            }
        }
        out
    }
}

/// Shortest round-trip form, in exponent notation far from 1.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e7).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn yes_no(b: bool) -> String {
    if b { "pass" } else { "FAIL" }.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        t: f64,
        pass: bool,
    }

    #[test]
    fn records_carry_schema() {
        let mut r = Report::new("concentrate");
        r.record("row", &Row { t: 0.5, pass: true });
        let text = r.render(Format::Records);
        assert_eq!(text, "{\"schema\":\"cvxtau.report/1\",\"command\":\"concentrate\",\"record\":\"row\",\"t\":0.5,\"pass\":true}\n");
    }

    #[test]
    fn tables_are_tab_delimited() {
        let mut r = Report::new("analyze");
        let mut t = Table::new("tails", &["h", "lambda"]);
        t.push(vec![num(1.0), num(f64::INFINITY)]);
        r.table(t);
        assert_eq!(r.render(Format::Table), "# tails\nh\tlambda\n1\tinf\n");
    }
}
