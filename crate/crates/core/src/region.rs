//! Activation regions and local decision functions.
//!
//! For the pattern `θ` induced by an input, the set of inputs inducing the
//! same pattern is the polyhedron `{x : P x + q ≥ 0}` and the network agrees
//! with the affine map `C x + d` on it. Both are assembled in one forward
//! pass: hidden layer `i` contributes the rows `diag(2θ⁽ⁱ⁾ − 1)·(C, d)` of
//! the affine map feeding it, then the map is pushed through the layer with
//! inactive units zeroed.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, norm2, Matrix, Vector, View};
use crate::network::{predicted_class, relu, ActivationPattern, ForwardTrace, MlpNetwork};

/// Default membership tolerance for [`region_contains`].
pub const MEMBERSHIP_EPS: f64 = 1e-9;

/// The polyhedron `{x : P x + q ≥ 0}` of one activation pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRegion {
    p: Matrix,
    q: Vector,
    layer_offsets: Vec<usize>,
}

impl ActivationRegion {
    pub fn new(p: Matrix, q: Vector, layer_offsets: Vec<usize>) -> Result<Self> {
        if q.dim() != p.rows() {
            return Err(Error::DimensionMismatch {
                op: "region",
                left: p.shape(),
                right: (q.dim(), 1),
            });
        }
        if layer_offsets.last().copied().unwrap_or(0) != p.rows()
            || layer_offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(Error::InvalidArgument(
                "layer offsets must be non-decreasing and end at the row count".into(),
            ));
        }
        Ok(Self {
            p,
            q,
            layer_offsets,
        })
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }

    pub fn q(&self) -> &Vector {
        &self.q
    }

    pub fn num_faces(&self) -> usize {
        self.p.rows()
    }

    /// Row boundaries per hidden layer: layer `i` owns rows
    /// `offsets[i]..offsets[i + 1]`. Starts at 0.
    pub fn layer_offsets(&self) -> &[usize] {
        &self.layer_offsets
    }

    /// Which hidden layer produced face `row`.
    pub fn layer_of(&self, row: usize) -> Option<usize> {
        (0..self.layer_offsets.len().saturating_sub(1))
            .find(|&l| self.layer_offsets[l] <= row && row < self.layer_offsets[l + 1])
    }

    /// `P x + q`.
    pub fn slacks(&self, x: &[f64]) -> Result<Vector> {
        let mut s = self.p.matvec(x)?.into_vec();
        for (si, qi) in s.iter_mut().zip(self.q.iter()) {
            *si += qi;
        }
        Ok(Vector::from_raw(s))
    }
}

/// The affine map `x ↦ C x + d` that equals the network on a region.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionFunction {
    pub c: Matrix,
    pub d: Vector,
}

impl DecisionFunction {
    pub fn evaluate(&self, x: &[f64]) -> Result<Vector> {
        let mut v = self.c.matvec(x)?.into_vec();
        for (vi, di) in v.iter_mut().zip(self.d.iter()) {
            *vi += di;
        }
        Ok(Vector::from_raw(v))
    }

    /// Row `C_j − C_k` and offset `d_j − d_k` of the `j`-vs-`k` boundary.
    pub fn class_difference(&self, j: usize, k: usize) -> (Vec<f64>, f64) {
        let w = self
            .c
            .row(j)
            .iter()
            .zip(self.c.row(k))
            .map(|(a, b)| a - b)
            .collect();
        (w, self.d[j] - self.d[k])
    }
}

/// Everything computed for one input in a single pass.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionBundle {
    pub pattern: ActivationPattern,
    pub region: ActivationRegion,
    pub decision: DecisionFunction,
    /// `(C_i, d_i)` with `z⁽ⁱ⁾(x) = C_i x + d_i` on the region, one per layer.
    pub per_layer_affine: Vec<(Matrix, Vector)>,
    pub predicted: usize,
}

/// State handed to [`walk_layers`] visitors for each hidden layer.
pub(crate) struct HiddenLayer<'a> {
    pub theta: &'a [bool],
    /// Affine map feeding this layer: `z⁽ⁱ⁾ = c x + d` on the region.
    pub c: &'a Matrix,
    pub d: &'a [f64],
}

/// Runs the region recursion, calling `visit` once per hidden layer, and
/// returns the pattern with the final decision function.
pub(crate) fn walk_layers(
    net: &MlpNetwork,
    x: &[f64],
    mut visit: impl FnMut(HiddenLayer<'_>),
) -> Result<(ActivationPattern, DecisionFunction, Vec<f64>)> {
    net.check_input(x)?;
    let layers = net.layers();
    let m = layers.len();
    let dim = net.input_dim();

    let mut c = layers[0].weight.clone();
    let mut d: Vec<f64> = layers[0].bias.to_vec();
    let mut a: Vec<f64> = x.to_vec();
    let mut pattern = Vec::with_capacity(m - 1);
    let mut packed_w: Vec<f64> = Vec::new();
    let mut packed_c: Vec<f64> = Vec::new();

    for i in 0..m - 1 {
        let layer = &layers[i];
        let mut z = layer.weight.matvec_unchecked(&a);
        for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
            *zi += bi;
        }
        let theta: Vec<bool> = z.iter().map(|&v| v >= 0.0).collect();
        a = z.iter().map(|&v| relu(v)).collect();

        visit(HiddenLayer {
            theta: &theta,
            c: &c,
            d: &d,
        });

        let next = &layers[i + 1];
        let active: Vec<usize> = (0..theta.len()).filter(|&j| theta[j]).collect();
        let rows = next.outputs();
        let na = active.len();

        packed_w.clear();
        packed_w.reserve(rows * na);
        for r in 0..rows {
            let wr = next.weight.row(r);
            packed_w.extend(active.iter().map(|&j| wr[j]));
        }
        packed_c.clear();
        packed_c.reserve(na * dim);
        for &j in &active {
            packed_c.extend_from_slice(c.row(j));
        }

        let mut c_next = Matrix::zeros(rows, dim);
        linalg::gemm(
            View::row_major(&packed_w, rows, na),
            View::row_major(&packed_c, na, dim),
            0.0,
            &mut c_next,
        );
        let d_active: Vec<f64> = active.iter().map(|&j| d[j]).collect();
        let mut d_next: Vec<f64> = next.bias.to_vec();
        for (r, dn) in d_next.iter_mut().enumerate() {
            *dn += linalg::dot(&packed_w[r * na..(r + 1) * na], &d_active);
        }

        c = c_next;
        d = d_next;
        pattern.push(theta);
    }

    let logits = {
        let last = &layers[m - 1];
        let mut z = last.weight.matvec_unchecked(&a);
        for (zi, bi) in z.iter_mut().zip(last.bias.iter()) {
            *zi += bi;
        }
        z
    };

    Ok((
        ActivationPattern::new(pattern),
        DecisionFunction {
            c,
            d: Vector::from_raw(d),
        },
        logits,
    ))
}

/// Activation region, decision function and per-layer affine maps of the
/// pattern induced by `x`.
pub fn compute_region(net: &MlpNetwork, x: &[f64]) -> Result<RegionBundle> {
    let faces = net.hidden_units();
    let dim = net.input_dim();
    let mut p = Vec::with_capacity(faces * dim);
    let mut q = Vec::with_capacity(faces);
    let mut offsets = vec![0];
    let mut per_layer_affine = Vec::with_capacity(net.depth());

    let (pattern, decision, logits) = walk_layers(net, x, |layer| {
        for (j, &on) in layer.theta.iter().enumerate() {
            let sign = if on { 1.0 } else { -1.0 };
            p.extend(layer.c.row(j).iter().map(|v| sign * v));
            q.push(sign * layer.d[j]);
        }
        offsets.push(q.len());
        per_layer_affine.push((layer.c.clone(), Vector::from_raw(layer.d.to_vec())));
    })?;
    per_layer_affine.push((decision.c.clone(), decision.d.clone()));

    let rows = q.len();
    Ok(RegionBundle {
        pattern,
        region: ActivationRegion {
            p: Matrix::from_raw(rows, dim, p),
            q: Vector::from_raw(q),
            layer_offsets: offsets,
        },
        decision,
        per_layer_affine,
        predicted: predicted_class(&logits),
    })
}

/// Forward trace plus the local decision function, without the region.
///
/// Builds `C` from the output side (`K` rows at a time), which is far cheaper
/// than [`compute_region`] when only gradients of the logits are needed.
pub fn local_decision_function(
    net: &MlpNetwork,
    x: &[f64],
) -> Result<(ForwardTrace, DecisionFunction)> {
    let trace = net.forward(x)?;
    let layers = net.layers();
    let m = layers.len();
    let k = net.num_classes();

    let mut acc = layers[m - 1].weight.clone();
    let mut d: Vec<f64> = layers[m - 1].bias.to_vec();
    for i in (0..m - 1).rev() {
        let z = &trace.raw[i];
        let active: Vec<usize> = (0..z.dim()).filter(|&j| z[j] >= 0.0).collect();
        let na = active.len();
        let layer = &layers[i];
        let mut packed_acc = Vec::with_capacity(k * na);
        for r in 0..k {
            let row = acc.row(r);
            packed_acc.extend(active.iter().map(|&j| row[j]));
        }
        let b_active: Vec<f64> = active.iter().map(|&j| layer.bias[j]).collect();
        for (r, dr) in d.iter_mut().enumerate() {
            *dr += linalg::dot(&packed_acc[r * na..(r + 1) * na], &b_active);
        }
        let mut packed_w = Vec::with_capacity(na * layer.inputs());
        for &j in &active {
            packed_w.extend_from_slice(layer.weight.row(j));
        }
        let mut next = Matrix::zeros(k, layer.inputs());
        linalg::gemm(
            View::row_major(&packed_acc, k, na),
            View::row_major(&packed_w, na, layer.inputs()),
            0.0,
            &mut next,
        );
        acc = next;
    }
    Ok((
        trace,
        DecisionFunction {
            c: acc,
            d: Vector::from_raw(d),
        },
    ))
}

/// `min_i (P_i x + q_i) ≥ −eps`.
pub fn region_contains(region: &ActivationRegion, x: &[f64], eps: f64) -> Result<bool> {
    let slacks = region.slacks(x)?;
    Ok(slacks.iter().all(|&s| s >= -eps))
}

/// Distance from `u` to each face hyperplane `P_i x + q_i = 0`. Faces with a
/// zero normal are vacuous for a non-empty region and report `+∞`.
pub fn face_distances(region: &ActivationRegion, u: &[f64]) -> Result<Vec<f64>> {
    let slacks = region.slacks(u)?;
    Ok((0..region.num_faces())
        .map(|i| hyperplane_distance(slacks[i], norm2(region.p.row(i))))
        .collect())
}

/// `|value| / norm`, or `+∞` for a zero normal.
#[inline]
pub(crate) fn hyperplane_distance(value: f64, norm: f64) -> f64 {
    if norm == 0.0 {
        f64::INFINITY
    } else {
        libm::fabs(value) / norm
    }
}
