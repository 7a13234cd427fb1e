//! Binary weight files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RLUC"  u32 version (=1)  u32 num_layers  u32 widths[num_layers + 1]
//! per layer: f64 weight[rows * cols] (row-major), f64 bias[rows]
//! ```
//!
//! A JSON manifest with the same header is written next to the file as
//! `<path>.json`. It is for people; when present at load time it must agree
//! with the binary header.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use relucert_core::{Layer, Matrix, MlpNetwork, Vector};
use serde_json::json;

pub const MAGIC: &[u8; 4] = b"RLUC";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum WeightError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("bad magic {found:?}, expected \"RLUC\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported weight format version {found} (this build reads {VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("truncated weight file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{extra} trailing bytes after the last layer")]
    TrailingBytes { extra: usize },
    #[error("layer widths {header:?} in the header disagree with {other:?} in the manifest")]
    WidthMismatch { header: Vec<usize>, other: Vec<usize> },
    #[error("bad manifest: {0}")]
    Manifest(String),
    #[error("invalid network: {0}")]
    Network(#[from] relucert_core::Error),
}

pub fn manifest_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn encode(net: &MlpNetwork) -> Vec<u8> {
    let widths = net.widths();
    let floats: usize = net
        .layers()
        .iter()
        .map(|l| l.weight.as_slice().len() + l.bias.dim())
        .sum();
    let mut out = Vec::with_capacity(12 + 4 * widths.len() + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.depth() as u32).to_le_bytes());
    for w in &widths {
        out.extend_from_slice(&(*w as u32).to_le_bytes());
    }
    for layer in net.layers() {
        for v in layer.weight.as_slice().iter().chain(layer.bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    expected: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], WeightError> {
        if self.bytes.len() < self.pos + n {
            return Err(WeightError::Truncated {
                expected: self.expected.max(self.pos + n),
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, WeightError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, WeightError> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

/// Parses a weight file, returning the network and its header widths.
pub fn decode(bytes: &[u8]) -> Result<MlpNetwork, WeightError> {
    let mut r = Reader {
        bytes,
        pos: 0,
        expected: 12,
    };
    let magic: [u8; 4] = r.take(4)?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(WeightError::BadMagic { found: magic });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(WeightError::UnsupportedVersion { found: version });
    }
    let layers = r.u32()? as usize;
    r.expected = 12usize.saturating_add(layers.saturating_add(1).saturating_mul(4));
    let widths = (0..=layers)
        .map(|_| r.u32().map(|w| w as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let floats = widths
        .windows(2)
        .try_fold(0usize, |acc, w| acc.checked_add(w[1].checked_mul(w[0] + 1)?));
    r.expected = floats
        .and_then(|f| f.checked_mul(8))
        .and_then(|b| b.checked_add(r.pos))
        .unwrap_or(usize::MAX);
    let mut parsed = Vec::with_capacity(layers);
    for w in widths.windows(2) {
        let (cols, rows) = (w[0], w[1]);
        let weight = Matrix::new(rows, cols, r.f64s(rows * cols)?)?;
        let bias = Vector::new(r.f64s(rows)?)?;
        parsed.push(Layer::new(weight, bias)?);
    }
    if r.pos != bytes.len() {
        return Err(WeightError::TrailingBytes {
            extra: bytes.len() - r.pos,
        });
    }
    Ok(MlpNetwork::new(parsed)?)
}

pub fn manifest(net: &MlpNetwork) -> String {
    let value = json!({
        "format": "RLUC",
        "version": VERSION,
        "widths": net.widths(),
        "activation": "relu",
        "num_classes": net.num_classes(),
    });
    let mut s = serde_json::to_string_pretty(&value).expect("manifest is plain JSON");
    s.push('\n');
    s
}

fn check_manifest(net: &MlpNetwork, text: &str) -> Result<(), WeightError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| WeightError::Manifest(e.to_string()))?;
    let widths: Vec<usize> = value
        .get("widths")
        .and_then(|w| w.as_array())
        .ok_or_else(|| WeightError::Manifest("missing \"widths\" array".into()))?
        .iter()
        .map(|v| v.as_u64().map(|n| n as usize))
        .collect::<Option<_>>()
        .ok_or_else(|| WeightError::Manifest("non-integer width".into()))?;
    if widths != net.widths() {
        return Err(WeightError::WidthMismatch {
            header: net.widths(),
            other: widths,
        });
    }
    match value.get("activation").and_then(|a| a.as_str()) {
        Some("relu") => Ok(()),
        other => Err(WeightError::Manifest(format!(
            "activation {other:?}, only \"relu\" is supported"
        ))),
    }
}

/// Writes the weight file and its manifest.
pub fn save_weights(net: &MlpNetwork, path: &Path) -> Result<(), WeightError> {
    let io_err = |p: &Path| {
        let p = p.to_path_buf();
        move |source| WeightError::Io { path: p, source }
    };
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&encode(net)).map_err(io_err(path))?;
    let m = manifest_path(path);
    fs::write(&m, manifest(net)).map_err(io_err(&m))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<MlpNetwork, WeightError> {
    let bytes = fs::read(path).map_err(|source| WeightError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let net = decode(&bytes)?;
    let m = manifest_path(path);
    if let Ok(text) = fs::read_to_string(&m) {
        check_manifest(&net, &text)?;
    }
    Ok(net)
}
