//! CSV files with a `#`-prefixed metadata block above the header.

use std::fs;
use std::path::Path;

use super::HarnessError;

/// One CSV field.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    UInt(u64),
    /// Written with 17 significant digits.
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Value {
    pub fn render(&self) -> String {
        match self {
            Value::Int(v) => v.to_string(),
            Value::UInt(v) => v.to_string(),
            Value::Float(v) => format_float(*v),
            Value::Bool(v) => v.to_string(),
            Value::Text(s) => s.clone(),
            Value::Empty => String::new(),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::UInt(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::UInt(v as u64)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

impl<T: Into<Value>> From<Option<T>> for Value {
    fn from(v: Option<T>) -> Self {
        v.map_or(Value::Empty, Into::into)
    }
}

/// Scientific notation with 17 significant digits; parses back exactly.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the file contents: metadata lines (each prefixed `# `), the header,
/// then one line per row, all terminated by `\n`.
pub fn render_csv(
    metadata: &[String],
    schema: &[&str],
    rows: &[Vec<Value>],
) -> Result<String, HarnessError> {
    let mut out = String::new();
    for line in metadata {
        if line.is_empty() {
            out.push_str("#\n");
        } else {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let to_err = |e: csv::Error| HarnessError::Domain(format!("csv encoding failed: {e}"));
    writer.write_record(schema).map_err(to_err)?;
    for (k, row) in rows.iter().enumerate() {
        if row.len() != schema.len() {
            return Err(HarnessError::Domain(format!(
                "row {k} has {} fields, schema has {}",
                row.len(),
                schema.len()
            )));
        }
        writer
            .write_record(row.iter().map(Value::render))
            .map_err(to_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| HarnessError::Domain(format!("csv encoding failed: {e}")))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn emit_csv(
    path: &Path,
    metadata: &[String],
    schema: &[&str],
    rows: &[Vec<Value>],
) -> Result<(), HarnessError> {
    let text = render_csv(metadata, schema, rows)?;
    fs::write(path, text).map_err(|source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Splits a file produced by [`render_csv`] into metadata lines (without the
/// `# ` prefix) and parsed records, the first of which is the header.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>), HarnessError> {
    let mut metadata = Vec::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.trim_end_matches('\n');
            metadata.push(rest.strip_prefix(' ').unwrap_or(rest).to_string());
            body_start += line.len();
        } else {
            break;
        }
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(&text.as_bytes()[body_start..]);
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| HarnessError::Config(format!("unreadable csv: {e}")))?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    Ok((metadata, records))
}
