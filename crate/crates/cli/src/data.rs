//! Dataset plumbing shared by the subcommands.

use std::ops::Range;
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use relucert_core::trainer::LabeledData;
use relucert_core::Matrix;

use crate::io::idx::load_idx_pair;

/// Two-class MNIST: 1 for digits 5-9, 0 for 0-4.
pub fn binary_label(digit: u8) -> usize {
    usize::from(digit >= 5)
}

/// Loads an IDX image/label pair, optionally relabelled as two classes.
pub fn load_labeled(images: &Path, labels: &Path, binary: bool) -> Result<LabeledData> {
    let (images_idx, digits) = load_idx_pair(images, labels)
        .with_context(|| format!("loading {} / {}", images.display(), labels.display()))?;
    let labels = digits
        .iter()
        .map(|&d| if binary { binary_label(d) } else { d as usize })
        .collect();
    Ok(LabeledData::new(images_idx.pixels, labels)?)
}

/// Parses `A..B` (half-open). Either end may be omitted.
pub fn parse_range(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let parse = |t: &str, default: usize| -> Result<usize, String> {
        if t.is_empty() {
            Ok(default)
        } else {
            t.parse().map_err(|e| format!("bad bound {t:?}: {e}"))
        }
    };
    Ok(parse(a, 0)?..parse(b, usize::MAX)?)
}

/// Clamps an open upper bound to `len` and rejects empty or out-of-range
/// selections.
pub fn resolve_range(range: &Range<usize>, len: usize) -> Result<Range<usize>> {
    let end = if range.end == usize::MAX { len } else { range.end };
    if range.start >= end {
        bail!("sample range {}..{end} is empty", range.start);
    }
    if end > len {
        bail!("sample range {}..{end} exceeds the {len} available samples", range.start);
    }
    Ok(range.start..end)
}

pub fn parse_clip(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected LO,HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo <= hi) {
        return Err(format!("clip range {lo},{hi} is empty"));
    }
    Ok((lo, hi))
}

/// Rows `range` of `m`.
pub fn rows(m: &Matrix, range: Range<usize>) -> Matrix {
    let cols = m.cols();
    Matrix::new(range.len(), cols, m.as_slice()[range.start * cols..range.end * cols].to_vec())
        .expect("sub-block of a valid matrix")
}

/// Per-sample RNG that does not depend on how samples are split across
/// threads.
pub fn sample_rng(seed: u64, sample_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_id as u64);
    rng
}

/// Uniform direction on the unit sphere in `dim` dimensions.
pub fn unit_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
