//! Indented key-value reports and CSV tables.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::CliError;

/// Sections written in insertion order; keys inside a section are sorted.
#[derive(Debug, Default, Clone)]
pub struct Report {
    sections: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn section<T: Serialize>(&mut self, name: &str, value: &T) -> Result<&mut Self, CliError> {
        self.sections.push((name.to_string(), serde_json::to_value(value)?));
        Ok(self)
    }

    pub fn extend(&mut self, other: Report) {
        self.sections.extend(other.sections);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (name, value) in &self.sections {
            write_entry(&mut out, name, value, 0);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::Null => Some("none".into()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            let parts: Vec<String> = items.iter().filter_map(scalar).collect();
            Some(format!("[{}]", parts.join(", ")))
        }
        _ => None,
    }
}

fn write_entry(out: &mut String, key: &str, value: &Value, depth: usize) {
    let pad = "  ".repeat(depth);
    if let Some(s) = scalar(value) {
        let _ = writeln!(out, "{pad}{key} = {s}");
        return;
    }
    let _ = writeln!(out, "{pad}{key}:");
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                write_entry(out, k, v, depth + 1);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                write_entry(out, &format!("{key}[{i}]"), v, depth + 1);
            }
        }
        _ => unreachable!("scalars handled above"),
    }
}

/// Writes a header row and one row per record.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn num(x: f64) -> String {
    x.to_string()
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn nested_values_are_indented_and_sorted() {
        let mut r = Report::new();
        r.section("run", &json!({"b": 1.5, "a": {"y": [1, 2], "x": true}, "rows": [{"k": 1}]})).unwrap();
        let text = r.render();
        assert_eq!(text, "run:\n  a:\n    x = true\n    y = [1, 2]\n  b = 1.5\n  rows:\n    rows[0]:\n      k = 1\n");
    }

    #[test]
    fn floats_print_shortest_round_trip() {
        let mut r = Report::new();
        r.section("v", &0.1f64).unwrap();
        assert_eq!(r.render(), "v = 0.1\n");
        assert_eq!(num(2f64.ln()).parse::<f64>().unwrap(), 2f64.ln());
    }
}
