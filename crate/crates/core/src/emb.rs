//! Matrix containers on disk.
//!
//! Binary: `b"EMB1"`, rows (u32 LE), cols (u32 LE), then rows×cols f32 LE,
//! row-major. Several containers may be concatenated in one file.
//!
//! Text: a header row, then one clip per line; the first column is the clip
//! id, the rest are values. Tab-separated if the header has a tab, otherwise
//! comma-separated.

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"EMB1";

/// A matrix with optional per-row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMatrix<T> {
    pub ids: Option<Vec<String>>,
    pub matrix: Matrix<T>,
}

pub fn write_emb<T: Real>(mut w: impl Write, m: &Matrix<T>) -> Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::invalid("too many rows for EMB1"))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::invalid("too many cols for EMB1"))?;
    let mut buf = Vec::with_capacity(12 + 4 * m.as_slice().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        let f = v.to_f32().unwrap_or(f32::NAN);
        buf.extend_from_slice(&f.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one container. `Ok(None)` at a clean end of stream.
pub fn read_emb<T: Real>(mut r: impl Read) -> Result<Option<Matrix<T>>> {
    let mut magic = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut magic[got..])?;
        if n == 0 {
            break;
        }
        got += n;
    }
    if got == 0 {
        return Ok(None);
    }
    if got < 4 || &magic != MAGIC {
        return Err(Error::data("missing EMB1 magic"));
    }
    let mut dims = [0u8; 8];
    r.read_exact(&mut dims).map_err(truncated)?;
    let rows = u32::from_le_bytes(dims[0..4].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(dims[4..8].try_into().unwrap()) as usize;
    let count = rows.checked_mul(cols).ok_or_else(|| Error::data("EMB1 dimensions overflow"))?;
    let mut raw = vec![0u8; count * 4];
    r.read_exact(&mut raw).map_err(truncated)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| T::lit(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    Matrix::from_vec(rows, cols, data).map(Some)
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::data("truncated EMB1 container")
    } else {
        Error::Io(e)
    }
}

/// Reads every container in a byte stream.
pub fn read_emb_all<T: Real>(mut r: impl Read) -> Result<Vec<Matrix<T>>> {
    let mut out = Vec::new();
    while let Some(m) = read_emb(&mut r)? {
        out.push(m);
    }
    Ok(out)
}

pub fn parse_delimited<T: Real>(text: &str) -> Result<LabeledMatrix<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Ok(LabeledMatrix { ids: Some(Vec::new()), matrix: Matrix::zeros(0, 0) });
    };
    let sep = if header.contains('\t') { '\t' } else { ',' };
    let cols = header.split(sep).count().saturating_sub(1);
    let mut ids = Vec::new();
    let mut data = Vec::new();
    for (idx, line) in lines {
        let mut fields = line.split(sep);
        let id = fields.next().unwrap_or_default().trim().to_string();
        let values: Vec<&str> = fields.collect();
        if values.len() != cols {
            return Err(Error::Parse {
                line: idx + 1,
                message: format!("expected {cols} values, found {}", values.len()),
            });
        }
        for v in values {
            let x: f64 = v.trim().parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("`{}` is not a number", v.trim()),
            })?;
            data.push(T::lit(x));
        }
        ids.push(id);
    }
    let matrix = Matrix::from_vec(ids.len(), cols, data)?;
    Ok(LabeledMatrix { ids: Some(ids), matrix })
}

/// Loads a single matrix from either format (binary detected by magic).
pub fn load_matrix<T: Real>(path: impl AsRef<Path>) -> Result<LabeledMatrix<T>> {
    let bytes = fs::read(path.as_ref())?;
    if bytes.starts_with(MAGIC) {
        let matrix = read_emb(bytes.as_slice())?.ok_or_else(|| Error::data("empty EMB1 file"))?;
        Ok(LabeledMatrix { ids: None, matrix })
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::data(format!("{} is neither EMB1 nor UTF-8 text", path.as_ref().display())))?;
        parse_delimited(&text)
    }
}

pub fn save_matrix<T: Real>(path: impl AsRef<Path>, m: &Matrix<T>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write_emb(&mut f, m)?;
    f.flush()?;
    Ok(())
}
