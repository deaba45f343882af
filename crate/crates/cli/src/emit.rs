//! Deterministic report output: JSON with sorted keys, CSV and Markdown
//! tables, every float printed with 12 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Format;
use crate::run::ResultBundle;

/// `x` with 12 significant digits, like C's `%.12g`.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{x:.*}", (11 - exp).max(0) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<u64> for Cell {
    fn from(i: u64) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let escape = |s: String| s.replace('|', "\\|");
        let _ = writeln!(out, "| {} |", self.columns.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.columns.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| escape(c.render())).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }
}

/// Rewrites every float in `v` to its 12-significant-digit value so that the
/// serialized text is stable.
fn normalize(v: &Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64");
            let rounded: f64 = fmt_float(x).parse().expect("round trip");
            serde_json::Number::from_f64(rounded).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.iter().map(|(k, v)| (k.clone(), normalize(v))).collect()),
        other => other.clone(),
    }
}

/// Pretty JSON text with sorted keys and 12-digit floats.
pub fn to_json<T: Serialize>(value: &T) -> serde_json::Result<String> {
    let v = normalize(&serde_json::to_value(value)?);
    let mut out = Vec::new();
    write_value(&v, 0, &mut out);
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("utf-8"))
}

fn write_value(v: &Value, indent: usize, out: &mut Vec<u8>) {
    let pad = |n: usize, out: &mut Vec<u8>| out.extend(std::iter::repeat_n(b' ', 2 * n));
    match v {
        Value::Number(n) if n.is_f64() => out.extend(fmt_float(n.as_f64().expect("f64")).bytes()),
        Value::Array(a) if a.is_empty() => out.extend(b"[]"),
        Value::Array(a) => {
            out.extend(b"[\n");
            for (i, x) in a.iter().enumerate() {
                pad(indent + 1, out);
                write_value(x, indent + 1, out);
                out.extend(if i + 1 < a.len() { &b",\n"[..] } else { &b"\n"[..] });
            }
            pad(indent, out);
            out.push(b']');
        }
        Value::Object(o) if o.is_empty() => out.extend(b"{}"),
        Value::Object(o) => {
            let mut keys: Vec<&String> = o.keys().collect();
            keys.sort();
            out.extend(b"{\n");
            for (i, k) in keys.iter().enumerate() {
                pad(indent + 1, out);
                out.extend(serde_json::to_string(k).expect("string").bytes());
                out.extend(b": ");
                write_value(&o[*k], indent + 1, out);
                out.extend(if i + 1 < keys.len() { &b",\n"[..] } else { &b"\n"[..] });
            }
            pad(indent, out);
            out.push(b'}');
        }
        other => out.extend(serde_json::to_string(other).expect("scalar").bytes()),
    }
}

/// Writes the bundle under `dir`: `report.json`, `summary.csv` and
/// `summary.md` as selected by `formats`, plus the bundle's artifacts.
/// Returns the paths written, in order.
pub fn emit_report(bundle: &ResultBundle, formats: &[Format], dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: &str| -> std::io::Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(())
    };
    for f in formats {
        match f {
            Format::Json => put("report.json", &to_json(&bundle.json()).map_err(std::io::Error::other)?)?,
            Format::Csv => put("summary.csv", &bundle.table.to_csv())?,
            Format::Md => put("summary.md", &bundle.markdown())?,
        }
    }
    for a in &bundle.artifacts {
        put(&a.name, &a.text)?;
    }
    Ok(written)
}
