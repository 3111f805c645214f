//! Newline-delimited JSON record files with a versioned header line.
//!
//! A non-empty file starts with `{"format":"deskcraft","kind":<kind>,"version":1}`
//! followed by one record per line. A file with no records is empty.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::DatasetError;

pub const FORMAT: &str = "deskcraft";
pub const VERSION: u32 = 1;

/// A record type that can live in a pack file.
pub trait Record: Serialize + DeserializeOwned {
    const KIND: &'static str;

    /// Semantic checks beyond the schema: (field path, message).
    fn check(&self) -> Result<(), (String, String)> {
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub kind: String,
    pub version: u32,
}

/// One problem found in a pack, located by 1-based line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub line: usize,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.field.is_empty() || self.field == "." {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            write!(f, "line {}: {}: {}", self.line, self.field, self.message)
        }
    }
}

pub fn header_line(kind: &str) -> String {
    serde_json::to_string(&Header { format: FORMAT.into(), kind: kind.into(), version: VERSION })
        .expect("header serializes")
}

pub fn to_jsonl<T: Record>(records: &[T]) -> Result<String, DatasetError> {
    if records.is_empty() {
        return Ok(String::new());
    }
    let mut out = header_line(T::KIND);
    out.push('\n');
    for (i, r) in records.iter().enumerate() {
        if let Err((field, message)) = r.check() {
            return Err(DatasetError::SchemaViolation { index: i, line: i + 2, field, message });
        }
        out.push_str(&serde_json::to_string(r).map_err(|e| DatasetError::SchemaViolation {
            index: i,
            line: i + 2,
            field: String::new(),
            message: e.to_string(),
        })?);
        out.push('\n');
    }
    Ok(out)
}

fn parse_line<T: Record>(line: &str, line_no: usize) -> Result<T, Violation> {
    let de = &mut serde_json::Deserializer::from_str(line);
    let rec: T = serde_path_to_error::deserialize(de).map_err(|e| Violation {
        line: line_no,
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    rec.check().map_err(|(field, message)| Violation { line: line_no, field, message })?;
    Ok(rec)
}

fn check_header(line: &str, kind: &str) -> Result<(), Violation> {
    let bad = |message: String| Violation { line: 1, field: String::new(), message };
    let h: Header = serde_json::from_str(line).map_err(|e| bad(format!("bad header: {e}")))?;
    if h.format != FORMAT {
        return Err(bad(format!("format `{}` is not `{FORMAT}`", h.format)));
    }
    if h.kind != kind {
        return Err(bad(format!("pack holds `{}` records, expected `{kind}`", h.kind)));
    }
    if h.version != VERSION {
        return Err(bad(format!("unsupported version {}", h.version)));
    }
    Ok(())
}

/// Reads every valid record and collects every violation; never stops early
/// except on a bad header, which makes the rest uninterpretable.
pub fn scan<T: Record>(text: &str) -> (Vec<T>, Vec<Violation>) {
    let mut lines = text.lines().enumerate();
    let Some((_, first)) = lines.by_ref().find(|(_, l)| !l.trim().is_empty()) else {
        return (Vec::new(), Vec::new());
    };
    if let Err(v) = check_header(first, T::KIND) {
        return (Vec::new(), vec![v]);
    }
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        match parse_line::<T>(line, i + 1) {
            Ok(r) => records.push(r),
            Err(v) => errors.push(v),
        }
    }
    (records, errors)
}

pub fn from_jsonl<T: Record>(text: &str) -> Result<Vec<T>, DatasetError> {
    let (records, errors) = scan::<T>(text);
    match errors.into_iter().next() {
        None => Ok(records),
        Some(v) => Err(DatasetError::SchemaViolation {
            index: v.line.saturating_sub(2),
            line: v.line,
            field: v.field,
            message: v.message,
        }),
    }
}

pub fn read_records<T: Record>(path: &Path) -> Result<Vec<T>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    from_jsonl(&text)
}

/// Writes via a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), DatasetError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| DatasetError::io(path, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| DatasetError::io(path, e))?;
    tmp.persist(path).map_err(|e| DatasetError::io(path, e.error))?;
    Ok(())
}

pub fn write_records<T: Record>(records: &[T], path: &Path) -> Result<(), DatasetError> {
    write_atomic(path, &to_jsonl(records)?)
}
