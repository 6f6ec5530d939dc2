//! Row-oriented result tables and their CSV form.

use std::fmt;
use std::path::Path;

use hgdlab::LabError;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Missing,
}

impl Value {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            Value::Text(s) => s.trim().parse().ok(),
            Value::Bool(_) | Value::Missing => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_true(&self) -> bool {
        match self {
            Value::Bool(b) => *b,
            Value::Text(s) => s == "true",
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Missing => Ok(()),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<Option<f64>> for Value {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Value::Missing, Value::Float)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        // seeds use the full 64 bits; keep them exact as text
        if v <= i64::MAX as u64 {
            Value::Int(v as i64)
        } else {
            Value::Text(v.to_string())
        }
    }
}

impl From<Option<u64>> for Value {
    fn from(v: Option<u64>) -> Self {
        v.map_or(Value::Missing, Value::from)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::from(v as u64)
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

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> hgdlab::Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| LabError::Usage(format!("no column `{name}`; available: {}", self.columns.join(", "))))
    }

    pub fn get(&self, row: usize, name: &str) -> hgdlab::Result<&Value> {
        Ok(&self.rows[row][self.column(name)?])
    }

    pub fn f64s(&self, name: &str) -> hgdlab::Result<Vec<Option<f64>>> {
        let c = self.column(name)?;
        Ok(self.rows.iter().map(|r| r[c].as_f64()).collect())
    }

    pub fn to_csv_bytes(&self) -> hgdlab::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| v.to_string()))?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.into_error()))
    }

    pub fn write_csv(&self, path: &Path) -> hgdlab::Result<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.to_csv_bytes()?)?;
        Ok(())
    }

    /// Reads a CSV; every non-empty cell comes back as text.
    pub fn from_csv_bytes(bytes: &[u8]) -> hgdlab::Result<Self> {
        let mut r = csv::Reader::from_reader(bytes);
        let mut t = Table::new(r.headers()?.iter());
        for rec in r.records() {
            let rec = rec?;
            t.push(
                rec.iter().map(|c| if c.is_empty() { Value::Missing } else { Value::Text(c.to_string()) }).collect(),
            );
        }
        Ok(t)
    }

    pub fn read_csv(path: &Path) -> hgdlab::Result<Self> {
        Self::from_csv_bytes(&std::fs::read(path)?)
    }
}
