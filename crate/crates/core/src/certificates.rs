//! Lower bounds on the L2 distance from an input to the nearest input with a
//! different predicted class.
//!
//! * [`simplex_certificate`] works at any depth: inside the activation region
//!   the network is affine, so the nearest adversarial example is either on a
//!   local class boundary (`d_min`) or outside the region, past a face
//!   (`p_min`).
//! * [`decision_boundary_certificate`] covers one-hidden-layer networks by
//!   relaxing the activation pattern to the unit box and bounding the
//!   boundary normal by `‖W²_j − W²_k‖·‖W¹‖₂`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, dot, norm2, Matrix, Vector, View, SPECTRAL_MAX_ITERS, SPECTRAL_TOL};
use crate::network::{predicted_class, relu, MlpNetwork};
use crate::region::{compute_region, hyperplane_distance, DecisionFunction};

/// Which half of `min(p_min, d_min)` attains the value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    FaceBinding,
    BoundaryBinding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexCertificate {
    pub predicted: usize,
    /// Distance to the nearest face of the activation region.
    pub p_min: f64,
    /// Distance to the nearest local class boundary.
    pub d_min: f64,
    pub value: f64,
    pub binding_face: Option<usize>,
    pub binding_class: Option<usize>,
    pub active_branch: Branch,
}

/// Class-boundary term `|(C_j − C_k)·u + (d_j − d_k)| / ‖C_j − C_k‖`.
///
/// A zero normal with a nonzero offset never crosses inside the region and is
/// `+∞`. A zero normal with a zero offset means the two classes tie on the
/// whole region, `u` included, so the distance is 0.
fn boundary_term(w: &[f64], offset: f64, u: &[f64]) -> f64 {
    let norm = norm2(w);
    if norm == 0.0 {
        if offset == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        hyperplane_distance(dot(w, u) + offset, norm)
    }
}

struct NearestFace {
    p_min: f64,
    binding_face: Option<usize>,
}

impl Default for NearestFace {
    fn default() -> Self {
        Self {
            p_min: f64::INFINITY,
            binding_face: None,
        }
    }
}

impl NearestFace {
    /// Folds in `(row, distance)` pairs of one layer; ties keep the lowest row.
    fn absorb(&mut self, dists: &mut [(usize, f64)], row_base: usize) {
        dists.sort_unstable_by_key(|e| e.0);
        for &(i, dist) in dists.iter() {
            if dist < self.p_min {
                self.p_min = dist;
                self.binding_face = Some(row_base + i);
            }
        }
    }
}

/// Rows `rows` of `w` restricted to columns `cols`, packed row-major.
fn gather(w: &Matrix, rows: &[usize], cols: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for &r in rows {
        let wr = w.row(r);
        out.extend(cols.iter().map(|&j| wr[j]));
    }
    out
}

/// `a · b` for packed row-major `a` (`m × k`) and `b` (`k × n`).
fn product(a: &[f64], m: usize, k: usize, b: &[f64], n: usize) -> Matrix {
    let mut out = Matrix::zeros(m, n);
    linalg::gemm(View::row_major(a, m, k), View::row_major(b, k, n), 0.0, &mut out);
    out
}

/// `min(p_min, d_min)` for the activation region containing `u`.
///
/// Equals the minimum over all faces of [`compute_region`], but only
/// materializes the face rows that can attain it. Face `i` of a layer fed by
/// the active rows `c_j` of the previous map has normal `Σ_j w_ij c_j`, whose
/// norm is at most `B_i = Σ_j |w_ij| ‖c_j‖`; with numerator `|z_i|` its
/// distance is at least `|z_i| / B_i`, so rows where that already exceeds the
/// best face found so far are skipped. Active rows are always built because
/// the next layer needs them, except in the last hidden layer, where the
/// output map is formed as `(W_out W_L) C_{L-1}` instead.
pub fn simplex_certificate(net: &MlpNetwork, u: &[f64]) -> Result<SimplexCertificate> {
    net.check_input(u)?;
    let layers = net.layers();
    let m = layers.len();
    let dim = u.len();

    let mut raw: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut a = u.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let mut z = layer.weight.matvec_unchecked(&a);
        for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
            *zi += bi;
        }
        if i + 1 < m {
            a = z.iter().map(|&v| relu(v)).collect();
        }
        raw.push(z);
    }
    let logits = &raw[m - 1];

    let mut faces = NearestFace::default();
    let mut row_base = 0;

    // First hidden layer: the map is W¹ itself.
    let first = &layers[0];
    let n0 = first.outputs();
    let mut norms0 = Vec::with_capacity(n0);
    let mut dists: Vec<(usize, f64)> = Vec::with_capacity(n0);
    for i in 0..n0 {
        let row = first.weight.row(i);
        let norm = norm2(row);
        norms0.push(norm);
        dists.push((i, hyperplane_distance(dot(row, u) + first.bias[i], norm)));
    }
    faces.absorb(&mut dists, row_base);
    row_base += n0;
    let mut active: Vec<usize> = (0..n0).filter(|&j| raw[0][j] >= 0.0).collect();
    // Active rows of the current map, their norms and offsets.
    let mut c_act: Vec<f64> = Vec::with_capacity(active.len() * dim);
    for &j in &active {
        c_act.extend_from_slice(first.weight.row(j));
    }
    let mut norm_act: Vec<f64> = active.iter().map(|&j| norms0[j]).collect();
    let mut d_act: Vec<f64> = active.iter().map(|&j| first.bias[j]).collect();

    for l in 1..m - 1 {
        let layer = &layers[l];
        let n = layer.outputs();
        let na = active.len();
        let all: Vec<usize> = (0..n).collect();
        let w_all = gather(&layer.weight, &all, &active);
        let d: Vec<f64> = (0..n)
            .map(|i| layer.bias[i] + dot(&w_all[i * na..(i + 1) * na], &d_act))
            .collect();
        let bound: Vec<f64> = (0..n)
            .map(|i| {
                w_all[i * na..(i + 1) * na]
                    .iter()
                    .zip(&norm_act)
                    .map(|(w, c)| libm::fabs(*w) * c)
                    .sum()
            })
            .collect();
        let next_active: Vec<usize> = (0..n).filter(|&i| raw[l][i] >= 0.0).collect();
        let last_hidden = l == m - 2;

        let mut dists: Vec<(usize, f64)> = Vec::new();
        let exact_rows = |rows: &[usize], dists: &mut Vec<(usize, f64)>| -> (Matrix, Vec<f64>) {
            let packed = gather(&layer.weight, rows, &active);
            let c = product(&packed, rows.len(), na, &c_act, dim);
            let mut norms = Vec::with_capacity(rows.len());
            for (r, &i) in rows.iter().enumerate() {
                let row = c.row(r);
                let norm = norm2(row);
                norms.push(norm);
                dists.push((i, hyperplane_distance(dot(row, u) + d[i], norm)));
            }
            (c, norms)
        };

        let mut built = vec![false; n];
        let mut next_c = None;
        if !last_hidden {
            next_c = Some(exact_rows(&next_active, &mut dists));
            for &i in &next_active {
                built[i] = true;
            }
        }
        let threshold = dists.iter().map(|e| e.1).fold(faces.p_min, f64::min);
        let candidates: Vec<usize> = (0..n)
            .filter(|&i| {
                if built[i] {
                    return false;
                }
                // Slack for rounding between z and the affine numerator.
                let z = libm::fabs(raw[l][i]);
                let lower = z - 1e-8 * (1.0 + z);
                bound[i] == 0.0 || lower <= threshold * bound[i] * (1.0 + 1e-9)
            })
            .collect();
        if !candidates.is_empty() {
            exact_rows(&candidates, &mut dists);
        }
        faces.absorb(&mut dists, row_base);
        row_base += n;

        if let Some((c, norms)) = next_c {
            c_act = c.into_vec();
            norm_act = norms;
            d_act = next_active.iter().map(|&i| d[i]).collect();
        } else {
            // Fold the last hidden layer into the output map.
            let out = &layers[m - 1];
            let k = out.outputs();
            let w_out = gather(&out.weight, &(0..k).collect::<Vec<_>>(), &next_active);
            let w_mid = gather(&layer.weight, &next_active, &active);
            let fused = product(&w_out, k, next_active.len(), &w_mid, na);
            let c_out = product(fused.as_slice(), k, na, &c_act, dim);
            let d_mid: Vec<f64> = next_active.iter().map(|&i| d[i]).collect();
            let d_out: Vec<f64> = (0..k)
                .map(|r| out.bias[r] + dot(&w_out[r * next_active.len()..(r + 1) * next_active.len()], &d_mid))
                .collect();
            return Ok(finish(net, u, logits, faces, c_out, d_out));
        }
        active = next_active;
    }

    // One hidden layer: the output map is W² restricted to the active units.
    let out = &layers[m - 1];
    let k = out.outputs();
    let w_out = gather(&out.weight, &(0..k).collect::<Vec<_>>(), &active);
    let c_out = product(&w_out, k, active.len(), &c_act, dim);
    let d_out: Vec<f64> = (0..k)
        .map(|r| out.bias[r] + dot(&w_out[r * active.len()..(r + 1) * active.len()], &d_act))
        .collect();
    Ok(finish(net, u, logits, faces, c_out, d_out))
}

fn finish(
    net: &MlpNetwork,
    u: &[f64],
    logits: &[f64],
    faces: NearestFace,
    c: Matrix,
    d: Vec<f64>,
) -> SimplexCertificate {
    let decision = DecisionFunction {
        c,
        d: Vector::from_raw(d),
    };
    let NearestFace { p_min, binding_face } = faces;
    let k = predicted_class(logits);
    let mut d_min = f64::INFINITY;
    let mut binding_class = None;
    for j in (0..net.num_classes()).filter(|&j| j != k) {
        let (w, offset) = decision.class_difference(j, k);
        let dist = boundary_term(&w, offset, u);
        if dist < d_min {
            d_min = dist;
            binding_class = Some(j);
        }
    }

    let (value, active_branch) = if p_min <= d_min {
        (p_min, Branch::FaceBinding)
    } else {
        (d_min, Branch::BoundaryBinding)
    };
    SimplexCertificate {
        predicted: k,
        p_min,
        d_min,
        value,
        binding_face,
        binding_class,
        active_branch,
    }
}

/// Gradient of the simplex certificate with respect to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateGradient {
    pub grad: Vector,
    /// Set when several terms bind within [`KINK_TIE_TOL`] or the binding
    /// term sits on its own hyperplane; `grad` is then the subgradient of the
    /// lowest-index binding term.
    pub at_kink: bool,
    pub value: f64,
}

/// Two certificate terms closer than this are treated as tied.
pub const KINK_TIE_TOL: f64 = 1e-9;
const ON_HYPERPLANE: f64 = 1e-12;

/// `∇_u min(p_min, d_min)`.
///
/// The binding term is `|w·u + b| / ‖w‖` with `w` either a face normal or a
/// class-difference row, both constant on the region, so the gradient is
/// `sign(w·u + b)·w / ‖w‖`. Terms are indexed faces first, then classes.
pub fn simplex_gradient(net: &MlpNetwork, u: &[f64]) -> Result<CertificateGradient> {
    let bundle = compute_region(net, u)?;
    let k = bundle.predicted;
    let faces = bundle.region.num_faces();

    let mut terms: Vec<(Vec<f64>, f64, f64)> = Vec::with_capacity(faces + net.num_classes());
    for i in 0..faces {
        let w = bundle.region.p().row(i).to_vec();
        let b = bundle.region.q()[i];
        let dist = hyperplane_distance(dot(&w, u) + b, norm2(&w));
        terms.push((w, b, dist));
    }
    for j in (0..net.num_classes()).filter(|&j| j != k) {
        let (w, b) = bundle.decision.class_difference(j, k);
        let dist = boundary_term(&w, b, u);
        terms.push((w, b, dist));
    }

    let value = terms.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
    let dim = net.input_dim();
    if !value.is_finite() {
        return Ok(CertificateGradient {
            grad: Vector::zeros(dim),
            at_kink: false,
            value,
        });
    }
    let tied: Vec<usize> = (0..terms.len())
        .filter(|&i| terms[i].2 <= value + KINK_TIE_TOL)
        .collect();
    let (w, b, _) = &terms[tied[0]];
    let signed = dot(w, u) + b;
    let norm = norm2(w);
    let grad = if norm == 0.0 {
        vec![0.0; dim]
    } else {
        let s = if signed < 0.0 { -1.0 } else { 1.0 };
        w.iter().map(|v| s * v / norm).collect()
    };
    Ok(CertificateGradient {
        grad: Vector::from_raw(grad),
        at_kink: tied.len() > 1 || libm::fabs(signed) < ON_HYPERPLANE,
        value,
    })
}

/// `min_{θ ∈ [0,1]ⁿ} |aᵀθ + b|` with a minimizer.
///
/// The affine value ranges over `[b + Σ min(a_i, 0), b + Σ max(a_i, 0)]`. When
/// that interval contains 0 the minimizer starts from `θ = 0` and fills
/// coordinates that move the value toward 0, in index order, the last one
/// fractionally. Otherwise it is the vertex at the nearer end.
pub fn box_min_abs_affine(a: &[f64], b: f64) -> (f64, Vec<f64>) {
    let lo = b + a.iter().map(|&v| v.min(0.0)).sum::<f64>();
    let hi = b + a.iter().map(|&v| v.max(0.0)).sum::<f64>();
    let mut theta = vec![0.0; a.len()];
    if lo > 0.0 {
        for (t, &v) in theta.iter_mut().zip(a) {
            if v < 0.0 {
                *t = 1.0;
            }
        }
        return (lo, theta);
    }
    if hi < 0.0 {
        for (t, &v) in theta.iter_mut().zip(a) {
            if v > 0.0 {
                *t = 1.0;
            }
        }
        return (-hi, theta);
    }

    // Water-filling from θ = 0 toward zero.
    let mut remaining = b;
    for (t, &v) in theta.iter_mut().zip(a) {
        if remaining == 0.0 {
            break;
        }
        if v == 0.0 || (v > 0.0) == (remaining > 0.0) {
            continue;
        }
        let need = -remaining / v;
        if need >= 1.0 {
            *t = 1.0;
            remaining += v;
        } else {
            *t = need;
            remaining = 0.0;
        }
    }
    (0.0, theta)
}

/// One `j ≠ k` term of the decision-boundary certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTerm {
    pub class: usize,
    /// Relaxed numerator `min_θ |…|`.
    pub numerator: f64,
    /// `‖W²_j − W²_k‖₂`.
    pub head_norm: f64,
    /// `numerator / (head_norm · ‖W¹‖₂)`, `+∞` for a zero denominator.
    pub value: f64,
    pub minimizing_theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionBoundaryCertificate {
    pub predicted: usize,
    /// `+∞` when no class pair has a reachable boundary.
    pub value: f64,
    pub spectral_norm: f64,
    pub terms: Vec<BoundaryTerm>,
}

impl DecisionBoundaryCertificate {
    pub fn binding_term(&self) -> Option<&BoundaryTerm> {
        self.terms
            .iter()
            .filter(|t| t.value.is_finite())
            .min_by(|a, b| a.value.total_cmp(&b.value))
    }

    pub fn per_class_numerators(&self) -> Vec<(usize, f64)> {
        self.terms.iter().map(|t| (t.class, t.numerator)).collect()
    }
}

/// Decision-boundary certificate for a fixed two-layer network; caches
/// `‖W¹‖₂` across inputs.
#[derive(Debug, Clone)]
pub struct DecisionBoundaryCertifier<'a> {
    net: &'a MlpNetwork,
    spectral_norm: f64,
}

impl<'a> DecisionBoundaryCertifier<'a> {
    pub fn new(net: &'a MlpNetwork) -> Result<Self> {
        if net.depth() != 2 {
            return Err(Error::UnsupportedArchitecture(format!(
                "the decision-boundary certificate needs exactly one hidden layer, \
                 network has {} weight layers",
                net.depth()
            )));
        }
        let spectral_norm = net.layers()[0]
            .weight
            .spectral_norm(SPECTRAL_TOL, SPECTRAL_MAX_ITERS)?;
        Ok(Self { net, spectral_norm })
    }

    pub fn spectral_norm(&self) -> f64 {
        self.spectral_norm
    }

    /// Relaxed inner problem for the `j`-vs-`k` pair: coefficients of
    /// `θ ↦ (W^θ_j − W^θ_k) u + b^θ_j − b^θ_k`, which is affine in `θ`.
    pub fn numerator_coefficients(&self, z1: &[f64], j: usize, k: usize) -> (Vec<f64>, f64) {
        let head = &self.net.layers()[1];
        let (wj, wk) = (head.weight.row(j), head.weight.row(k));
        let a = (0..z1.len()).map(|i| (wj[i] - wk[i]) * z1[i]).collect();
        (a, head.bias[j] - head.bias[k])
    }

    pub fn certify(&self, u: &[f64]) -> Result<DecisionBoundaryCertificate> {
        let trace = self.net.forward(u)?;
        let k = trace.predicted;
        let z1 = &trace.raw[0];
        let head = &self.net.layers()[1];
        let mut terms = Vec::with_capacity(self.net.num_classes() - 1);
        let mut value = f64::INFINITY;
        for j in (0..self.net.num_classes()).filter(|&j| j != k) {
            let (a, b) = self.numerator_coefficients(z1, j, k);
            let (numerator, theta) = box_min_abs_affine(&a, b);
            let head_norm = libm::sqrt(
                head.weight
                    .row(j)
                    .iter()
                    .zip(head.weight.row(k))
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum(),
            );
            let denom = head_norm * self.spectral_norm;
            let term_value = if denom == 0.0 {
                f64::INFINITY
            } else {
                numerator / denom
            };
            value = value.min(term_value);
            terms.push(BoundaryTerm {
                class: j,
                numerator,
                head_norm,
                value: term_value,
                minimizing_theta: theta,
            });
        }
        Ok(DecisionBoundaryCertificate {
            predicted: k,
            value,
            spectral_norm: self.spectral_norm,
            terms,
        })
    }
}

/// Decision-boundary certificate for a two-layer network.
pub fn decision_boundary_certificate(
    net: &MlpNetwork,
    u: &[f64],
) -> Result<DecisionBoundaryCertificate> {
    DecisionBoundaryCertifier::new(net)?.certify(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::network_from_parts;

    const I2: [f64; 4] = [1.0, 0.0, 0.0, 1.0];

    fn shifted_identity(beta: f64) -> MlpNetwork {
        network_from_parts(&[(2, 2, &I2, &[beta, beta]), (2, 2, &I2, &[-beta, -beta])]).unwrap()
    }

    #[test]
    fn simplex_identity_example() {
        let net = shifted_identity(10.0);
        let c = simplex_certificate(&net, &[1.0, 0.0]).unwrap();
        assert_eq!(c.predicted, 0);
        assert!((c.d_min - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((c.p_min - 10.0).abs() < 1e-15);
        assert_eq!(c.value, c.d_min);
        assert_eq!(c.active_branch, Branch::BoundaryBinding);
        assert_eq!(c.binding_class, Some(1));
        assert_eq!(c.binding_face, Some(1));
    }

    #[test]
    fn simplex_identity_example_grid() {
        // Grid oracle: the closest point of [−3,3]² classified as 1 (x₂ > x₁
        // strictly, since ties go to class 0) within the all-active region.
        let net = shifted_identity(10.0);
        let u = [1.0, 0.0];
        let n = 1201;
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let x = [-3.0 + 6.0 * i as f64 / (n - 1) as f64, -3.0 + 6.0 * j as f64 / (n - 1) as f64];
                if net.predict(&x).unwrap() != 0 {
                    let d = ((x[0] - u[0]).powi(2) + (x[1] - u[1]).powi(2)).sqrt();
                    best = best.min(d);
                }
            }
        }
        let c = simplex_certificate(&net, &u).unwrap();
        assert!(c.value <= best);
        assert!(best - c.value < 0.01);
    }

    #[test]
    fn simplex_zero_on_boundary_or_face() {
        let net = shifted_identity(10.0);
        let c = simplex_certificate(&net, &[0.5, 0.5]).unwrap();
        assert_eq!(c.d_min, 0.0);
        assert_eq!(c.value, 0.0);

        // u on the face x₁ + 10 = 0 while the class boundary is 15/√2 away.
        let c = simplex_certificate(&net, &[-10.0, 5.0]).unwrap();
        assert_eq!(c.p_min, 0.0);
        assert!(c.d_min > 0.0);
        assert_eq!(c.value, 0.0);
        assert_eq!(c.active_branch, Branch::FaceBinding);
    }

    #[test]
    fn gradient_of_binding_face() {
        // One hidden unit with row (3,4), bias −5; u = (3,4) gives z = 20,
        // distance 4. The head is arranged so the class boundary is far.
        let net = network_from_parts(&[
            (1, 2, &[3.0, 4.0], &[-5.0]),
            (2, 1, &[1.0, 0.0], &[0.0, -1e6]),
        ])
        .unwrap();
        let c = simplex_certificate(&net, &[3.0, 4.0]).unwrap();
        assert_eq!(c.p_min, 4.0);
        let g = simplex_gradient(&net, &[3.0, 4.0]).unwrap();
        assert!(!g.at_kink);
        assert_eq!(g.value, 4.0);
        assert!((g.grad[0] - 0.6).abs() < 1e-15);
        assert!((g.grad[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn gradient_flags_ties() {
        // Face x₁ + 1 = 0 and boundary x₁ = x₂ are both 1/√2·… choose u so
        // both terms equal 1: face distance |u₁ + 1| = 1 at u₁ = 0, boundary
        // distance |u₁ − u₂|/√2 = 1 at u₂ = −√2.
        let net = network_from_parts(&[(2, 2, &I2, &[1.0, 10.0]), (2, 2, &I2, &[0.0, -9.0])])
            .unwrap();
        let u = [0.0, -2f64.sqrt()];
        let c = simplex_certificate(&net, &u).unwrap();
        assert!((c.p_min - 1.0).abs() < 1e-12 && (c.d_min - 1.0).abs() < 1e-12);
        let g = simplex_gradient(&net, &u).unwrap();
        assert!(g.at_kink);
    }

    #[test]
    fn box_examples() {
        let (v, t) = box_min_abs_affine(&[1.0, -1.0], 0.0);
        assert_eq!(v, 0.0);
        assert_eq!(t, vec![0.0, 0.0]);
        let (v, t) = box_min_abs_affine(&[1.0, 1.0], 1.0);
        assert_eq!(v, 1.0);
        assert_eq!(t, vec![0.0, 0.0]);
        let (v, t) = box_min_abs_affine(&[2.0, -3.0], 4.0);
        assert_eq!(v, 1.0);
        assert_eq!(t, vec![0.0, 1.0]);
        // Vertex enumeration confirms the last case.
        let vals: Vec<f64> = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)]
            .iter()
            .map(|(x, y)| (2.0 * x - 3.0 * y + 4.0f64).abs())
            .collect();
        assert_eq!(vals.iter().cloned().fold(f64::INFINITY, f64::min), 1.0);
    }

    #[test]
    fn box_water_filling_reaches_zero() {
        let a = [0.5, -2.0, -3.0, 1.0];
        let b = 3.0;
        let (v, t) = box_min_abs_affine(&a, b);
        assert_eq!(v, 0.0);
        let at: f64 = a.iter().zip(&t).map(|(x, y)| x * y).sum::<f64>() + b;
        assert!(at.abs() < 1e-15);
        assert_eq!(t, vec![0.0, 1.0, 1.0 / 3.0, 0.0]);
        assert!(t.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn decision_boundary_rejects_depth_three() {
        let net = network_from_parts(&[
            (2, 2, &I2, &[0.0, 0.0]),
            (2, 2, &I2, &[0.0, 0.0]),
            (2, 2, &I2, &[0.0, 0.0]),
        ])
        .unwrap();
        assert!(matches!(
            decision_boundary_certificate(&net, &[1.0, 0.0]),
            Err(Error::UnsupportedArchitecture(_))
        ));
    }

    #[test]
    fn decision_boundary_degenerate_head() {
        let net = network_from_parts(&[
            (2, 2, &I2, &[0.0, 0.0]),
            (2, 2, &[1.0, 2.0, 1.0, 2.0], &[1.0, 0.0]),
        ])
        .unwrap();
        let c = decision_boundary_certificate(&net, &[0.3, 0.4]).unwrap();
        assert_eq!(c.value, f64::INFINITY);
        assert!(c.binding_term().is_none());
    }

    #[test]
    fn decision_boundary_straddling_zero() {
        // Class 0 leads by 1 at u but switching off the unit feeding class 0
        // would flip it, so the relaxed numerator reaches 0.
        let net = network_from_parts(&[
            (2, 2, &I2, &[0.0, 0.0]),
            (2, 2, &[2.0, 0.0, 0.0, 1.0], &[0.0, 0.0]),
        ])
        .unwrap();
        let c = decision_boundary_certificate(&net, &[1.0, 1.0]).unwrap();
        assert_eq!(c.predicted, 0);
        assert_eq!(c.value, 0.0);
        assert!(c.terms[0].minimizing_theta.iter().all(|&t| (0.0..=1.0).contains(&t)));
    }
}
