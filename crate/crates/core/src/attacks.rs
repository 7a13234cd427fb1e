//! Gradient attacks that give upper bounds on the adversarial distance.
//!
//! Gradients come from the local affine map of the network, so they are
//! exact (no finite differences). Neither attack clips to the input domain
//! unless asked to: the certificates bound unconstrained L2 perturbations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{distance, norm2, Vector};
use crate::network::MlpNetwork;
use crate::region::local_decision_function;

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    /// Final iterate; misclassified when `success` is set.
    pub adversarial_input: Vector,
    /// `‖adversarial_input − u‖₂`, or `+∞` when the attack failed.
    pub distance: f64,
    pub iterations_used: usize,
    pub success: bool,
}

impl AttackResult {
    fn failure(last: Vec<f64>, iterations_used: usize) -> Self {
        Self {
            adversarial_input: Vector::from_raw(last),
            distance: f64::INFINITY,
            iterations_used,
            success: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FgsmConfig {
    pub step: f64,
    pub max_iters: usize,
    /// Bisection steps used to pull the first flipped iterate back toward
    /// the previous one.
    pub bisections: usize,
    pub clip: Option<(f64, f64)>,
}

impl Default for FgsmConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            max_iters: 1000,
            bisections: 20,
            clip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeepFoolConfig {
    pub overshoot: f64,
    pub max_iters: usize,
    pub clip: Option<(f64, f64)>,
    /// Keep every iterate within this L2 distance of the clean input.
    pub radius_cap: Option<f64>,
}

impl Default for DeepFoolConfig {
    fn default() -> Self {
        Self {
            overshoot: 0.02,
            max_iters: 100,
            clip: None,
            radius_cap: None,
        }
    }
}

fn clip_in_place(x: &mut [f64], clip: Option<(f64, f64)>) {
    if let Some((lo, hi)) = clip {
        for v in x {
            *v = v.clamp(lo, hi);
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| libm::exp(l - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Iterative FGSM on the cross-entropy of the clean prediction.
///
/// Steps `x ← x + step·sign(∇ₓ L)` until the predicted class changes, then
/// bisects along the last step for the flip point closest to the previous
/// iterate.
pub fn iterative_fgsm(net: &MlpNetwork, u: &[f64], cfg: &FgsmConfig) -> Result<AttackResult> {
    if !(cfg.step > 0.0) {
        return Err(Error::InvalidArgument("FGSM step must be positive".into()));
    }
    let clean = net.forward(u)?.predicted;
    let mut x = u.to_vec();
    for iter in 1..=cfg.max_iters {
        let trace = net.forward(&x)?;
        let mut g = softmax(&trace.logits);
        g[clean] -= 1.0;
        let grad = net.input_gradient(&trace, &g)?;
        if grad.iter().all(|&v| v == 0.0) {
            return Ok(AttackResult::failure(x, iter));
        }
        let mut next: Vec<f64> = x
            .iter()
            .zip(grad.iter())
            .map(|(&xi, &gi)| {
                let s = if gi > 0.0 {
                    1.0
                } else if gi < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                xi + cfg.step * s
            })
            .collect();
        clip_in_place(&mut next, cfg.clip);
        if net.predict(&next)? != clean {
            let dir: Vec<f64> = next.iter().zip(&x).map(|(a, b)| a - b).collect();
            let point = |t: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(a, d)| a + t * d).collect() };
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..cfg.bisections {
                let mid = 0.5 * (lo + hi);
                if net.predict(&point(mid))? != clean {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let adv = if hi == 1.0 { next } else { point(hi) };
            debug_assert_ne!(net.predict(&adv)?, clean);
            return Ok(AttackResult {
                distance: distance(&adv, u),
                adversarial_input: Vector::from_raw(adv),
                iterations_used: iter,
                success: true,
            });
        }
        x = next;
    }
    Ok(AttackResult::failure(x, cfg.max_iters))
}

/// Multi-class DeepFool.
///
/// At each iterate the network is affine, so the nearest class boundary is
/// `l = argmin_{j≠k} |f_j − f_k| / ‖∇f_j − ∇f_k‖`; the accumulated step to it
/// is applied with `(1 + overshoot)` until the class changes.
pub fn deepfool(net: &MlpNetwork, u: &[f64], cfg: &DeepFoolConfig) -> Result<AttackResult> {
    if !(cfg.overshoot >= 0.0) {
        return Err(Error::InvalidArgument(
            "DeepFool overshoot must be non-negative".into(),
        ));
    }
    let clean = net.forward(u)?.predicted;
    let dim = u.len();
    let mut x = u.to_vec();
    let mut total = vec![0.0; dim];
    for iter in 0..=cfg.max_iters {
        let (trace, local) = local_decision_function(net, &x)?;
        if trace.predicted != clean {
            return Ok(AttackResult {
                distance: distance(&x, u),
                adversarial_input: Vector::from_raw(x),
                iterations_used: iter,
                success: true,
            });
        }
        if iter == cfg.max_iters {
            break;
        }
        let logits = &trace.logits;
        let mut best: Option<(f64, Vec<f64>, f64)> = None;
        for j in (0..net.num_classes()).filter(|&j| j != clean) {
            let (w, _) = local.class_difference(j, clean);
            let wn = norm2(&w);
            if wn == 0.0 {
                continue;
            }
            let gap = libm::fabs(logits[j] - logits[clean]);
            let dist = gap / wn;
            if best.as_ref().map_or(true, |b| dist < b.0) {
                best = Some((dist, w, gap));
            }
        }
        let Some((_, w, gap)) = best else {
            return Ok(AttackResult::failure(x, iter));
        };
        // A tiny floor on the gap so an input sitting exactly on a tie still
        // moves off it.
        let nudge = 1e-12 * libm::fabs(logits[clean]).max(1.0);
        let wn2: f64 = w.iter().map(|v| v * v).sum();
        let scale = (gap + nudge) / wn2;
        for (t, wi) in total.iter_mut().zip(&w) {
            *t += scale * wi;
        }
        let mut next: Vec<f64> = u
            .iter()
            .zip(&total)
            .map(|(ui, ti)| ui + (1.0 + cfg.overshoot) * ti)
            .collect();
        if let Some(cap) = cfg.radius_cap {
            let r = distance(&next, u);
            if r > cap {
                let s = cap / r;
                for (n, ui) in next.iter_mut().zip(u) {
                    *n = ui + (*n - ui) * s;
                }
            }
        }
        clip_in_place(&mut next, cfg.clip);
        x = next;
    }
    Ok(AttackResult::failure(x, cfg.max_iters))
}
