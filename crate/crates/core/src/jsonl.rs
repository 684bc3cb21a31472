//! Line-delimited JSON records.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses one record per non-blank line. Errors carry the 1-based line number.
pub fn from_reader<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let rec = serde_json::from_str(trimmed)
            .map_err(|e| Error::Parse { line: idx + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let file = File::open(path)?;
    from_reader(BufReader::new(file))
}

pub fn to_string<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("record serializes"));
        s.push('\n');
    }
    s
}

pub fn write<T: Serialize>(mut w: impl Write, records: &[T]) -> Result<()> {
    w.write_all(to_string(records).as_bytes())?;
    Ok(())
}
