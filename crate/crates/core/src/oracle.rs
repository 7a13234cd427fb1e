//! Brute-force estimates of the true distance to the nearest adversarial
//! input, for networks small enough to search exhaustively. These exist to
//! check the certificates, not to replace them.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{distance, dot, Matrix, Vector};
use crate::network::MlpNetwork;

/// Grid points per axis at every level.
pub const GRID_POINTS: usize = 101;
/// Largest input dimension [`grid_oracle`] accepts.
pub const GRID_MAX_DIM: usize = 3;
/// Largest hidden width [`enumerate_exact_2layer`] accepts.
pub const EXACT_MAX_HIDDEN: usize = 12;

const PROJECTION_ROUNDS: usize = 500;
const PROJECTION_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleStatus {
    Found,
    /// Every grid point in the box keeps the clean class.
    NoAdversarialInBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub status: OracleStatus,
    pub distance_lower: f64,
    /// Distance of the best misclassified grid point; a true upper bound.
    pub distance_upper: f64,
    pub witness: Option<Vector>,
    /// Spacing of the first, unrefined grid; bounds how far the search can
    /// be off and sets `distance_lower`.
    pub resolution: f64,
    /// Spacing of the last refinement level.
    pub final_spacing: f64,
    /// `distance_upper` after each level, coarse first.
    pub level_uppers: Vec<f64>,
}

/// Closest misclassified point among `GRID_POINTS^D` points of the box
/// `center ± half_width`. Ties go to the first point in row-major grid order.
fn scan_box(
    net: &MlpNetwork,
    u: &[f64],
    clean: usize,
    center: &[f64],
    half_width: f64,
) -> Result<Option<(f64, Vec<f64>)>> {
    let dim = u.len();
    let spacing = 2.0 * half_width / (GRID_POINTS - 1) as f64;
    let total = GRID_POINTS.pow(dim as u32);
    let chunk = 8192;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        let mut pts = Vec::with_capacity((end - start) * dim);
        for idx in start..end {
            let mut rem = idx;
            let mut coords = [0usize; GRID_MAX_DIM];
            for a in (0..dim).rev() {
                coords[a] = rem % GRID_POINTS;
                rem /= GRID_POINTS;
            }
            for a in 0..dim {
                // The middle index reproduces the center exactly.
                let offset = coords[a] as f64 - ((GRID_POINTS - 1) / 2) as f64;
                pts.push(center[a] + offset * spacing);
            }
        }
        let batch = Matrix::new(end - start, dim, pts)?;
        let classes = net.predict_batch(&batch)?;
        for (r, &c) in classes.iter().enumerate() {
            if c == clean {
                continue;
            }
            let p = batch.row(r);
            let d = distance(p, u);
            if best.as_ref().map_or(true, |b| d < b.0) {
                best = Some((d, p.to_vec()));
            }
        }
        start = end;
    }
    Ok(best)
}

/// Multi-resolution grid search for the nearest input whose predicted class
/// differs from that of `u`.
///
/// Level 0 scans the L∞ box of half-width `radius` around `u`; each of the
/// `levels` refinements re-scans a box one previous cell wide around the best
/// witness so far.
pub fn grid_oracle(net: &MlpNetwork, u: &[f64], radius: f64, levels: usize) -> Result<OracleResult> {
    let dim = net.input_dim();
    if dim > GRID_MAX_DIM {
        return Err(Error::OracleDimension {
            dim,
            max: GRID_MAX_DIM,
        });
    }
    if !(radius > 0.0) || levels == 0 {
        return Err(Error::InvalidArgument(format!(
            "grid oracle needs radius > 0 and levels ≥ 1 (got {radius}, {levels})"
        )));
    }
    let clean = net.forward(u)?.predicted;
    let resolution = 2.0 * radius / (GRID_POINTS - 1) as f64;
    let Some((mut upper, mut witness)) = scan_box(net, u, clean, u, radius)? else {
        return Ok(OracleResult {
            status: OracleStatus::NoAdversarialInBox,
            distance_lower: f64::INFINITY,
            distance_upper: f64::INFINITY,
            witness: None,
            resolution,
            final_spacing: resolution,
            level_uppers: vec![f64::INFINITY],
        });
    };
    let mut level_uppers = vec![upper];
    let mut spacing = resolution;
    for _ in 0..levels {
        let half = spacing;
        if let Some((d, w)) = scan_box(net, u, clean, &witness, half)? {
            if d < upper {
                upper = d;
                witness = w;
            }
        }
        spacing = 2.0 * half / (GRID_POINTS - 1) as f64;
        level_uppers.push(upper);
    }
    Ok(OracleResult {
        status: OracleStatus::Found,
        distance_lower: (upper - 2.0 * resolution * libm::sqrt(dim as f64)).max(0.0),
        distance_upper: upper,
        witness: Some(Vector::from_raw(witness)),
        resolution,
        final_spacing: spacing,
        level_uppers,
    })
}

/// `{x : a·x + c ≥ 0}`, or `= 0` when `equality` is set.
#[derive(Debug, Clone)]
pub(crate) struct Constraint {
    pub a: Vec<f64>,
    pub c: f64,
    pub equality: bool,
}

impl Constraint {
    fn value(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.c
    }

    fn violation(&self, x: &[f64]) -> f64 {
        let v = self.value(x);
        if self.equality {
            libm::fabs(v)
        } else {
            (-v).max(0.0)
        }
    }

    fn project(&self, y: &[f64]) -> Vec<f64> {
        let v = self.value(y);
        let nn = dot(&self.a, &self.a);
        if nn == 0.0 || (!self.equality && v >= 0.0) {
            return y.to_vec();
        }
        let s = v / nn;
        y.iter().zip(&self.a).map(|(yi, ai)| yi - s * ai).collect()
    }
}

pub(crate) enum Projection {
    Point(Vec<f64>),
    Infeasible,
    NotConverged(f64),
}

/// Nearest point to `u` in the intersection of `sets`, by Dykstra's
/// alternating projections.
pub(crate) fn project_onto_intersection(u: &[f64], sets: &[Constraint]) -> Projection {
    let mut x = u.to_vec();
    let mut increments = vec![vec![0.0; u.len()]; sets.len()];
    let mut gap = f64::INFINITY;
    for _ in 0..PROJECTION_ROUNDS {
        let before = x.clone();
        for (set, inc) in sets.iter().zip(increments.iter_mut()) {
            let y: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
            let next = set.project(&y);
            for ((p, yi), ni) in inc.iter_mut().zip(&y).zip(&next) {
                *p = yi - ni;
            }
            x = next;
        }
        gap = distance(&x, &before);
        let worst = sets.iter().map(|s| s.violation(&x)).fold(0.0, f64::max);
        if gap <= PROJECTION_TOL && worst <= FEASIBILITY_TOL {
            return Projection::Point(x);
        }
    }
    let worst = sets.iter().map(|s| s.violation(&x)).fold(0.0, f64::max);
    if worst > 1e-6 {
        Projection::Infeasible
    } else {
        Projection::NotConverged(gap)
    }
}

/// Nearest point to `u` on the line `{x ∈ R² : w·x + off = 0}` satisfying
/// all `halfspaces`, by clipping the line's parameter interval.
fn closest_on_line_2d(u: &[f64], w: &[f64], off: f64, halfspaces: &[Constraint]) -> Option<f64> {
    let nn = dot(w, w);
    let s = (dot(w, u) + off) / nn;
    let foot = [u[0] - s * w[0], u[1] - s * w[1]];
    let wn = libm::sqrt(nn);
    let dir = [-w[1] / wn, w[0] / wn];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for h in halfspaces {
        let rate = dot(&h.a, &dir);
        let at_foot = h.value(&foot);
        let scale = libm::sqrt(dot(&h.a, &h.a)).max(1.0);
        if libm::fabs(rate) <= 1e-15 * scale {
            if at_foot < -FEASIBILITY_TOL * scale {
                return None;
            }
            continue;
        }
        let t = -at_foot / rate;
        if rate > 0.0 {
            lo = lo.max(t);
        } else {
            hi = hi.min(t);
        }
    }
    if lo > hi + FEASIBILITY_TOL {
        return None;
    }
    let t = 0.0f64.max(lo).min(hi.max(lo));
    let along = libm::fabs(s) * wn;
    Some(libm::sqrt(along * along + t * t))
}

/// Exact distance from `u` to the nearest class tie of a two-class,
/// one-hidden-layer network, by enumerating all `2^{N₁}` activation patterns.
///
/// On the closure of each pattern's polyhedron the logit gap is affine, so
/// the nearest tie point within it is a convex projection. Returns `+∞` when
/// no pattern contains a tie point.
pub fn enumerate_exact_2layer(net: &MlpNetwork, u: &[f64]) -> Result<f64> {
    if net.depth() != 2 {
        return Err(Error::UnsupportedArchitecture(format!(
            "exact enumeration needs one hidden layer, network has {} weight layers",
            net.depth()
        )));
    }
    let hidden = net.layers()[0].outputs();
    if hidden > EXACT_MAX_HIDDEN {
        return Err(Error::UnsupportedArchitecture(format!(
            "exact enumeration supports at most {EXACT_MAX_HIDDEN} hidden units, got {hidden}"
        )));
    }
    if net.num_classes() != 2 {
        return Err(Error::UnsupportedArchitecture(format!(
            "exact enumeration needs 2 classes, got {}",
            net.num_classes()
        )));
    }
    let trace = net.forward(u)?;
    let k = trace.predicted;
    let j = 1 - k;
    let first = &net.layers()[0];
    let head = &net.layers()[1];
    let dim = net.input_dim();
    let head_diff: Vec<f64> = (0..hidden)
        .map(|i| head.weight.row(j)[i] - head.weight.row(k)[i])
        .collect();
    let head_off = head.bias[j] - head.bias[k];

    let mut best = f64::INFINITY;
    for mask in 0u64..(1u64 << hidden) {
        let on = |i: usize| mask >> i & 1 == 1;
        let halfspaces: Vec<Constraint> = (0..hidden)
            .map(|i| {
                let s = if on(i) { 1.0 } else { -1.0 };
                Constraint {
                    a: first.weight.row(i).iter().map(|v| s * v).collect(),
                    c: s * first.bias[i],
                    equality: false,
                }
            })
            .collect();
        let mut w = vec![0.0; dim];
        let mut off = head_off;
        for i in (0..hidden).filter(|&i| on(i)) {
            for (wv, a) in w.iter_mut().zip(first.weight.row(i)) {
                *wv += head_diff[i] * a;
            }
            off += head_diff[i] * first.bias[i];
        }

        let candidate = if dot(&w, &w) == 0.0 {
            if off != 0.0 {
                continue;
            }
            // The classes tie on this whole region.
            match project_onto_intersection(u, &halfspaces) {
                Projection::Point(x) => distance(&x, u),
                Projection::Infeasible => continue,
                Projection::NotConverged(gap) => {
                    return Err(Error::ProjectionNotConverged { pattern: mask, gap })
                }
            }
        } else if dim == 2 {
            match closest_on_line_2d(u, &w, off, &halfspaces) {
                Some(d) => d,
                None => continue,
            }
        } else {
            let s = (dot(&w, u) + off) / dot(&w, &w);
            let foot: Vec<f64> = u.iter().zip(&w).map(|(ui, wi)| ui - s * wi).collect();
            if halfspaces.iter().all(|h| h.value(&foot) >= -FEASIBILITY_TOL) {
                distance(&foot, u)
            } else {
                let mut sets = halfspaces;
                sets.push(Constraint {
                    a: w,
                    c: off,
                    equality: true,
                });
                match project_onto_intersection(u, &sets) {
                    Projection::Point(x) => distance(&x, u),
                    Projection::Infeasible => continue,
                    Projection::NotConverged(gap) => {
                        return Err(Error::ProjectionNotConverged { pattern: mask, gap })
                    }
                }
            }
        };
        best = best.min(candidate);
    }
    Ok(best)
}
