//! Binary Gram persistence.
//!
//! Layout: 16-byte header (magic `TNQG`, version u32 LE, rows u32 LE, cols
//! u32 LE) followed by row-major 8-byte little-endian reals. Kernel kind,
//! hyperparameters, and sample ids live in a `<file>.meta.json` sidecar.
//! The parser validates the byte length against the header before
//! allocating anything, so truncated or hostile files fail fast.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelMatrix, KernelMeta};
use crate::matrix::Matrix;

const MAGIC: &[u8; 4] = b"TNQG";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

const SIDECAR_TAG: &str = "tnqk-gram-meta";
const SIDECAR_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    kind: KernelKind,
    meta: KernelMeta,
    row_ids: Vec<usize>,
    col_ids: Vec<usize>,
}

/// Serialize matrix values to the binary Gram layout.
pub fn write_gram_bytes(m: &Matrix) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows())
        .map_err(|_| Error::invalid(format!("{} rows exceed the format limit", m.rows())))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::invalid(format!("{} cols exceed the format limit", m.cols())))?;
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    for v in m.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parse the binary Gram layout. Errors name the offending byte offset.
pub fn read_gram_bytes(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(
            bytes.len() as u64,
            format!("file ends inside the {HEADER_LEN}-byte header"),
        ));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"TNQG\""));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let rows = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let expect = HEADER_LEN as u128 + rows as u128 * cols as u128 * 8;
    if bytes.len() as u128 != expect {
        return Err(Error::format(
            HEADER_LEN as u64,
            format!(
                "{}x{} matrix needs {expect} bytes, file has {}",
                rows,
                cols,
                bytes.len()
            ),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (idx, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::format(
                (HEADER_LEN + idx * 8) as u64,
                format!("non-finite entry {v}"),
            ));
        }
        data.push(v);
    }
    Matrix::from_vec(rows, cols, data)
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut os = path.as_os_str().to_owned();
    os.push(".meta.json");
    PathBuf::from(os)
}

/// Write the binary Gram plus its metadata sidecar.
pub fn save_gram(k: &KernelMatrix, path: &Path) -> Result<()> {
    std::fs::write(path, write_gram_bytes(&k.values)?)?;
    let sidecar = Sidecar {
        format: SIDECAR_TAG.to_string(),
        version: SIDECAR_VERSION,
        kind: k.kind,
        meta: k.meta.clone(),
        row_ids: k.row_ids.clone(),
        col_ids: k.col_ids.clone(),
    };
    let mut text = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::invalid(format!("serializing gram sidecar: {e}")))?;
    text.push('\n');
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

/// Load matrix values only, ignoring any sidecar.
pub fn load_gram_values(path: &Path) -> Result<Matrix> {
    read_gram_bytes(&std::fs::read(path)?)
}

/// Load a Gram with its sidecar metadata.
pub fn load_gram(path: &Path) -> Result<KernelMatrix> {
    let values = load_gram_values(path)?;
    let text = std::fs::read_to_string(sidecar_path(path))?;
    let sidecar: Sidecar =
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string()))?;
    if sidecar.format != SIDECAR_TAG {
        return Err(Error::invalid(format!(
            "expected sidecar format {SIDECAR_TAG:?}, got {:?}",
            sidecar.format
        )));
    }
    if sidecar.version != SIDECAR_VERSION {
        return Err(Error::invalid(format!(
            "unsupported sidecar version {}",
            sidecar.version
        )));
    }
    KernelMatrix::new(
        values,
        sidecar.kind,
        sidecar.meta,
        sidecar.row_ids,
        sidecar.col_ids,
    )
}
