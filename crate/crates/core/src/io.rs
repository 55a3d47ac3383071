//! Binary matrix dumps and K-table export.
//!
//! Matrix layout: 16-byte header (`b"NEASSMAT"`, then the dimension as a
//! little-endian `u64`), followed by `dim * dim` entries in row-major order,
//! each as little-endian `f64` real part then imaginary part.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::expansion::KTable;
use crate::linalg::{Matrix, C64};
use crate::{NeassError, Result};

pub const MATRIX_MAGIC: &[u8; 8] = b"NEASSMAT";
pub const KTABLE_SCHEMA_VERSION: u32 = 1;

pub fn write_matrix<W: Write>(mut w: W, m: &Matrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(NeassError::Argument("only square matrices can be dumped".into()));
    }
    let n = m.nrows();
    let mut buf = Vec::with_capacity(16 + 16 * n * n);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    for r in 0..n {
        for c in 0..n {
            let z = m[(r, c)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix<R: Read>(mut r: R) -> Result<Matrix> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..8] != MATRIX_MAGIC {
        return Err(NeassError::Parse { offset: 0, message: "bad matrix magic".into() });
    }
    let n = u64::from_le_bytes(header[8..].try_into().expect("8 bytes")) as usize;
    let mut body = vec![0u8; 16 * n * n];
    r.read_exact(&mut body)?;
    let f = |k: usize| f64::from_le_bytes(body[8 * k..8 * k + 8].try_into().expect("8 bytes"));
    Ok(Matrix::from_fn(n, n, |row, col| {
        let k = 2 * (row * n + col);
        C64::new(f(k), f(k + 1))
    }))
}

pub fn save_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write_matrix(fs::File::create(path)?, m)
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    read_matrix(std::io::BufReader::new(fs::File::open(path)?))
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum TableEntryKind {
    K,
    L,
    KDot,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableEntry {
    pub kind: TableEntryKind,
    pub j: usize,
    pub i: usize,
    pub file: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TableIndex {
    pub schema_version: u32,
    pub t: f64,
    pub order: usize,
    pub entries: Vec<TableEntry>,
}

/// Writes `index.json` plus one matrix blob per stored coefficient into `dir`.
pub fn export_table(dir: &Path, table: &KTable) -> Result<TableIndex> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    let groups = [
        (TableEntryKind::K, &table.k, "k"),
        (TableEntryKind::L, &table.l, "l"),
        (TableEntryKind::KDot, &table.k_dot, "kdot"),
    ];
    for (kind, rows, prefix) in groups {
        for (j, row) in rows.iter().enumerate() {
            for (i, m) in row.iter().enumerate() {
                if let Some(m) = m {
                    let file = format!("{prefix}_{j}_{i}.bin");
                    save_matrix(&dir.join(&file), m)?;
                    entries.push(TableEntry { kind: kind.clone(), j, i, file });
                }
            }
        }
    }
    let index = TableIndex { schema_version: KTABLE_SCHEMA_VERSION, t: table.t, order: table.order, entries };
    fs::write(dir.join("index.json"), serde_json::to_vec_pretty(&index)?)?;
    Ok(index)
}

/// Reads a table written by [`export_table`]. Derivative error estimates are
/// not stored and come back as zero.
pub fn import_table(dir: &Path) -> Result<KTable> {
    let index: TableIndex = serde_json::from_slice(&fs::read(dir.join("index.json"))?)?;
    if index.schema_version != KTABLE_SCHEMA_VERSION {
        return Err(NeassError::Validation(format!("unsupported table schema {}", index.schema_version)));
    }
    let rows = |extra: usize| -> Vec<Vec<Option<Matrix>>> {
        (0..index.order + extra).map(|j| if j == 0 { vec![] } else { vec![None; j + 1] }).collect()
    };
    let mut k = rows(1);
    let mut l = rows(1);
    let mut k_dot = rows(0);
    if k_dot.is_empty() {
        k_dot.push(vec![]);
    }
    for e in &index.entries {
        let m = load_matrix(&dir.join(&e.file))?;
        let target = match e.kind {
            TableEntryKind::K => &mut k,
            TableEntryKind::L => &mut l,
            TableEntryKind::KDot => &mut k_dot,
        };
        let slot = target
            .get_mut(e.j)
            .and_then(|row| row.get_mut(e.i))
            .ok_or_else(|| NeassError::Validation(format!("entry ({}, {}) outside the table", e.j, e.i)))?;
        *slot = Some(m);
    }
    let k_dot_error = k_dot.iter().map(|row| vec![0.0; row.len()]).collect();
    Ok(KTable { t: index.t, order: index.order, k, l, k_dot, k_dot_error })
}
