//! IDX containers as used by the MNIST distribution. Header integers are
//! big-endian. Gzipped files are detected by their magic bytes.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use relucert_core::Matrix;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, thiserror::Error)]
pub enum IdxError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("wrong IDX magic {found:#010x}, expected {expected:#010x}")]
    WrongMagic { expected: u32, found: u32 },
    #[error("IDX dimensions {dims:?} overflow the address space")]
    DimensionOverflow { dims: Vec<u32> },
    #[error("truncated IDX payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("label {value} at index {index} is not a digit 0-9")]
    LabelOutOfRange { value: u8, index: usize },
    #[error("image and label files disagree: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },
}

/// Images flattened row by row, one per matrix row, pixels scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Matrix,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>, IdxError> {
    let io_err = |source| IdxError::Io {
        path: path.to_path_buf(),
        source,
    };
    let raw = fs::read(path).map_err(io_err)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(io_err)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn header(bytes: &[u8], magic: u32, ndims: usize) -> Result<(Vec<u32>, usize), IdxError> {
    let head = 4 + 4 * ndims;
    if bytes.len() < 4 {
        return Err(IdxError::Truncated {
            expected: head,
            found: bytes.len(),
        });
    }
    let found = u32::from_be_bytes(bytes[..4].try_into().unwrap());
    if found != magic {
        return Err(IdxError::WrongMagic {
            expected: magic,
            found,
        });
    }
    if bytes.len() < head {
        return Err(IdxError::Truncated {
            expected: head,
            found: bytes.len(),
        });
    }
    let dims: Vec<u32> = bytes[4..head]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().unwrap()))
        .collect();
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
        .and_then(|p| p.checked_add(head))
        .ok_or_else(|| IdxError::DimensionOverflow { dims: dims.clone() })?;
    if bytes.len() < payload {
        return Err(IdxError::Truncated {
            expected: payload,
            found: bytes.len(),
        });
    }
    Ok((dims, head))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages, IdxError> {
    let (dims, head) = header(bytes, IMAGES_MAGIC, 3)?;
    let (n, rows, cols) = (dims[0] as usize, dims[1] as usize, dims[2] as usize);
    let dim = rows * cols;
    let data = bytes[head..head + n * dim]
        .iter()
        .map(|&b| b as f64 / 255.0)
        .collect();
    Ok(IdxImages {
        rows,
        cols,
        pixels: Matrix::new(n, dim, data).expect("pixels are finite"),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, IdxError> {
    let (dims, head) = header(bytes, LABELS_MAGIC, 1)?;
    let labels = bytes[head..head + dims[0] as usize].to_vec();
    if let Some(index) = labels.iter().position(|&l| l > 9) {
        return Err(IdxError::LabelOutOfRange {
            value: labels[index],
            index,
        });
    }
    Ok(labels)
}

pub fn load_idx_images(path: &Path) -> Result<IdxImages, IdxError> {
    parse_idx_images(&read_maybe_gz(path)?)
}

pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>, IdxError> {
    parse_idx_labels(&read_maybe_gz(path)?)
}

/// Loads a matching image/label pair.
pub fn load_idx_pair(images: &Path, labels: &Path) -> Result<(IdxImages, Vec<u8>), IdxError> {
    let images = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    if images.len() != labels.len() {
        return Err(IdxError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok((images, labels))
}
