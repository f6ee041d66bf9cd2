//! IDX container parsing and writing.
//!
//! The format is a big-endian u32 magic (type and dimension count), one
//! big-endian u32 per dimension, then raw unsigned bytes. Parsers validate
//! every header field against the actual byte count before touching the
//! payload; errors carry the byte offset where the inconsistency shows.

use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::Dataset;

/// Magic for 3-dimensional unsigned-byte containers (images).
pub const IMAGES_MAGIC: u32 = 0x0000_0803;
/// Magic for 1-dimensional unsigned-byte containers (labels).
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Image side length the dataset loader insists on.
pub const IMAGE_SIDE: usize = 28;
/// Number of classes the dataset loader insists on.
pub const N_CLASSES: usize = 10;

pub const TRAIN_IMAGES_FILE: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS_FILE: &str = "train-labels-idx1-ubyte";

const IMAGES_HEADER: usize = 16;
const LABELS_HEADER: usize = 8;

/// A parsed image container: `count` images of `rows` x `cols` bytes,
/// row-major, concatenated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// One image's pixel slice.
    pub fn image(&self, i: usize) -> &[u8] {
        let len = self.rows * self.cols;
        &self.pixels[i * len..(i + 1) * len]
    }

    /// Pixel rows as a count x (rows*cols) real matrix in [0, 255].
    pub fn to_matrix(&self) -> Result<Matrix> {
        Matrix::from_vec(
            self.count,
            self.rows * self.cols,
            self.pixels.iter().map(|&b| f64::from(b)).collect(),
        )
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    match bytes.get(offset..offset + 4) {
        Some(word) => Ok(u32::from_be_bytes(word.try_into().expect("4-byte slice"))),
        None => Err(Error::format(
            bytes.len() as u64,
            format!("truncated header: need {} bytes", offset + 4),
        )),
    }
}

/// Parse an image container. The payload length is checked against the
/// header product before any image-sized work happens.
pub fn read_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        return Err(Error::format(
            0,
            format!("magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4)?;
    let rows = be_u32(bytes, 8)?;
    let cols = be_u32(bytes, 12)?;
    let expected = u128::from(count) * u128::from(rows) * u128::from(cols);
    let actual = (bytes.len() - IMAGES_HEADER) as u128;
    if expected != actual {
        return Err(Error::format(
            IMAGES_HEADER as u64,
            format!("payload holds {actual} bytes, header claims {expected}"),
        ));
    }
    Ok(IdxImages {
        count: count as usize,
        rows: rows as usize,
        cols: cols as usize,
        pixels: bytes[IMAGES_HEADER..].to_vec(),
    })
}

/// Parse a label container into raw label bytes.
pub fn read_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        return Err(Error::format(
            0,
            format!("magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"),
        ));
    }
    let count = be_u32(bytes, 4)?;
    let actual = (bytes.len() - LABELS_HEADER) as u128;
    if u128::from(count) != actual {
        return Err(Error::format(
            LABELS_HEADER as u64,
            format!("payload holds {actual} labels, header claims {count}"),
        ));
    }
    Ok(bytes[LABELS_HEADER..].to_vec())
}

pub fn write_idx_images(images: &IdxImages) -> Result<Vec<u8>> {
    let count = u32::try_from(images.count)
        .map_err(|_| Error::invalid("image count exceeds u32"))?;
    let rows = u32::try_from(images.rows).map_err(|_| Error::invalid("rows exceed u32"))?;
    let cols = u32::try_from(images.cols).map_err(|_| Error::invalid("cols exceed u32"))?;
    let expected = images
        .count
        .checked_mul(images.rows)
        .and_then(|v| v.checked_mul(images.cols));
    if expected != Some(images.pixels.len()) {
        return Err(Error::invalid("pixel buffer does not match image dimensions"));
    }
    let mut out = Vec::with_capacity(IMAGES_HEADER + images.pixels.len());
    out.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    out.extend_from_slice(&rows.to_be_bytes());
    out.extend_from_slice(&cols.to_be_bytes());
    out.extend_from_slice(&images.pixels);
    Ok(out)
}

pub fn write_idx_labels(labels: &[u8]) -> Result<Vec<u8>> {
    let count = u32::try_from(labels.len())
        .map_err(|_| Error::invalid("label count exceeds u32"))?;
    let mut out = Vec::with_capacity(LABELS_HEADER + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&count.to_be_bytes());
    out.extend_from_slice(labels);
    Ok(out)
}

/// Load the 28x28 10-class image dataset from `dir` as a raw-stage dataset
/// with features in [0, 255]. Expects the uncompressed training pair
/// `train-images-idx3-ubyte` / `train-labels-idx1-ubyte`.
pub fn load_fashion_mnist(dir: &Path) -> Result<Dataset> {
    let image_bytes = std::fs::read(dir.join(TRAIN_IMAGES_FILE))?;
    let label_bytes = std::fs::read(dir.join(TRAIN_LABELS_FILE))?;
    let images = read_idx_images(&image_bytes)?;
    if images.rows != IMAGE_SIDE {
        return Err(Error::format(
            8,
            format!("image rows {} where {IMAGE_SIDE} required", images.rows),
        ));
    }
    if images.cols != IMAGE_SIDE {
        return Err(Error::format(
            12,
            format!("image cols {} where {IMAGE_SIDE} required", images.cols),
        ));
    }
    let labels = read_idx_labels(&label_bytes)?;
    if labels.len() != images.count {
        return Err(Error::invalid(format!(
            "{} labels for {} images",
            labels.len(),
            images.count
        )));
    }
    if let Some(i) = labels.iter().position(|&l| usize::from(l) >= N_CLASSES) {
        return Err(Error::format(
            (LABELS_HEADER + i) as u64,
            format!("label {} out of range 0..{N_CLASSES}", labels[i]),
        ));
    }
    Dataset::raw(
        images.to_matrix()?,
        labels.into_iter().map(usize::from).collect(),
    )
}
