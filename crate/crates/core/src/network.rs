//! Fully-connected ReLU classifiers and their forward pass.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};

/// One affine layer `z = W a + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Matrix,
    pub bias: Vector,
}

impl Layer {
    pub fn new(weight: Matrix, bias: Vector) -> Result<Self> {
        if bias.dim() != weight.rows() {
            return Err(Error::DimensionMismatch {
                op: "layer bias",
                left: weight.shape(),
                right: (bias.dim(), 1),
            });
        }
        Ok(Self { weight, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }
}

/// An `M`-layer ReLU network `f: R^D → R^K`. ReLU follows every layer but the
/// last, whose outputs are the logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layers: Vec<Layer>,
}

impl MlpNetwork {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidNetwork(format!(
                "need at least 2 layers, got {}",
                layers.len()
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].inputs() != pair[0].outputs() {
                return Err(Error::InvalidNetwork(format!(
                    "layer {} has shape {:?} but layer {} has shape {:?}",
                    i + 1,
                    pair[0].weight.shape(),
                    i + 2,
                    pair[1].weight.shape()
                )));
            }
        }
        let k = layers.last().map(Layer::outputs).unwrap_or(0);
        if k < 2 {
            return Err(Error::InvalidNetwork(format!(
                "a classifier needs at least 2 classes, got {k}"
            )));
        }
        if layers[0].inputs() == 0 {
            return Err(Error::InvalidNetwork("input dimension is zero".into()));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Weight and bias buffers of each layer, for in-place updates.
    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.as_mut_slice(), l.bias.as_mut_slice()])
    }

    /// Number of weight layers `M`.
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    /// `[D, N_1, …, N_{M−1}, K]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.layers.len() + 1);
        w.push(self.input_dim());
        w.extend(self.layers.iter().map(Layer::outputs));
        w
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(Layer::outputs)
            .collect()
    }

    /// Total hidden units `Σ_{i<M} N_i`, the number of region faces.
    pub fn hidden_units(&self) -> usize {
        self.hidden_widths().iter().sum()
    }

    pub(crate) fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                op: "network input",
                left: self.layers[0].weight.shape(),
                right: (x.len(), 1),
            });
        }
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "network input",
                index,
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        self.check_input(x)?;
        let m = self.layers.len();
        let mut raw = Vec::with_capacity(m);
        let mut activated = Vec::with_capacity(m - 1);
        let mut a: Vec<f64> = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.matvec_unchecked(&a);
            for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += bi;
            }
            if i + 1 < m {
                a = z.iter().map(|&v| relu(v)).collect();
                activated.push(Vector::from_raw(a.clone()));
            }
            raw.push(Vector::from_raw(z));
        }
        let logits = raw[m - 1].clone();
        let predicted = predicted_class(&logits);
        Ok(ForwardTrace {
            raw,
            activated,
            logits,
            predicted,
        })
    }

    /// Logits only, without keeping intermediates.
    pub fn logits(&self, x: &[f64]) -> Result<Vector> {
        self.check_input(x)?;
        Ok(Vector::from_raw(self.logits_unchecked(x)))
    }

    pub(crate) fn logits_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let m = self.layers.len();
        let mut a = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weight.matvec_unchecked(&a);
            for (zi, bi) in z.iter_mut().zip(layer.bias.iter()) {
                *zi += bi;
                if i + 1 < m {
                    *zi = relu(*zi);
                }
            }
            a = z;
        }
        a
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        self.check_input(x)?;
        Ok(predicted_class(&self.logits_unchecked(x)))
    }

    /// Logits for every row of `inputs` (one sample per row), via GEMM.
    pub fn logits_batch(&self, inputs: &Matrix) -> Result<Matrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                op: "batch input",
                left: inputs.shape(),
                right: self.layers[0].weight.shape(),
            });
        }
        let m = self.layers.len();
        let mut a = inputs.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(a.rows(), layer.outputs());
            for r in 0..z.rows() {
                z.row_mut(r).copy_from_slice(&layer.bias);
            }
            linalg::gemm(a.view(), layer.weight.view().t(), 1.0, &mut z);
            if i + 1 < m {
                z.as_mut_slice().iter_mut().for_each(|v| *v = relu(*v));
            }
            a = z;
        }
        Ok(a)
    }

    /// Predicted class for every row of `inputs`.
    pub fn predict_batch(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        let logits = self.logits_batch(inputs)?;
        Ok((0..logits.rows())
            .map(|r| predicted_class(logits.row(r)))
            .collect())
    }

    /// `∇_x (gᵀ f(x))` using the ReLU mask recorded in `trace`.
    pub fn input_gradient(&self, trace: &ForwardTrace, g: &[f64]) -> Result<Vector> {
        if g.len() != self.num_classes() {
            return Err(Error::DimensionMismatch {
                op: "input_gradient",
                left: (self.num_classes(), 1),
                right: (g.len(), 1),
            });
        }
        let mut delta = g.to_vec();
        for i in (0..self.layers.len()).rev() {
            let mut back = self.layers[i].weight.matvec_transpose_unchecked(&delta);
            if i > 0 {
                for (b, z) in back.iter_mut().zip(trace.raw[i - 1].iter()) {
                    if *z < 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        Ok(Vector::from_raw(delta))
    }

    /// Multiplies the last layer's weights and bias by `c`.
    pub fn with_scaled_head(&self, c: f64) -> Result<MlpNetwork> {
        let mut layers = self.layers.clone();
        let last = layers.last_mut().expect("depth ≥ 2");
        let bias: Vec<f64> = last.bias.iter().map(|b| b * c).collect();
        *last = Layer::new(last.weight.scaled(c), Vector::new(bias)?)?;
        MlpNetwork::new(layers)
    }
}

#[inline]
pub(crate) fn relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// Pre-activations `z^(i)` for every layer, the last being the logits.
    pub raw: Vec<Vector>,
    /// Post-activations `a^(i)` for the hidden layers.
    pub activated: Vec<Vector>,
    pub logits: Vector,
    pub predicted: usize,
}

/// Which ReLUs are on (`z ≥ 0`) in each hidden layer.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActivationPattern {
    per_layer: Vec<Vec<bool>>,
}

impl ActivationPattern {
    pub fn new(per_layer: Vec<Vec<bool>>) -> Self {
        Self { per_layer }
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.per_layer
    }

    pub fn layer(&self, i: usize) -> &[bool] {
        &self.per_layer[i]
    }

    pub fn total_units(&self) -> usize {
        self.per_layer.iter().map(Vec::len).sum()
    }

    pub fn active_count(&self) -> usize {
        self.per_layer.iter().flatten().filter(|&&b| b).count()
    }

    /// The same pattern as `{0,1}` indicators.
    pub fn indicators(&self) -> Vec<Vec<u8>> {
        self.per_layer
            .iter()
            .map(|l| l.iter().map(|&b| b as u8).collect())
            .collect()
    }
}

/// Pattern induced by a forward pass. Zero pre-activations count as active.
pub fn activation_pattern(trace: &ForwardTrace) -> ActivationPattern {
    let hidden = trace.raw.len().saturating_sub(1);
    ActivationPattern::new(
        trace.raw[..hidden]
            .iter()
            .map(|z| z.iter().map(|&v| v >= 0.0).collect())
            .collect(),
    )
}

/// Smallest index attaining the maximum logit.
pub fn predicted_class(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Builds a network from `(rows, cols, weights, bias)` tuples; handy in tests
/// and examples.
pub fn network_from_parts(parts: &[(usize, usize, &[f64], &[f64])]) -> Result<MlpNetwork> {
    let mut layers = Vec::with_capacity(parts.len());
    for &(r, c, w, b) in parts {
        layers.push(Layer::new(
            Matrix::new(r, c, w.to_vec())?,
            Vector::new(b.to_vec())?,
        )?);
    }
    MlpNetwork::new(layers)
}
