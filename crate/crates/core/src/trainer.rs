//! Minibatch Adam training with softmax cross-entropy and Glorot init.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::network::{predicted_class, relu, Layer, MlpNetwork};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// `[D, N₁, …, K]`.
    pub widths: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(widths: Vec<usize>) -> Self {
        Self {
            widths,
            batch_size: 64,
            epochs: 20,
            learning_rate: 0.001,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.widths.len() < 3 || self.widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "widths must list input, ≥1 hidden and output sizes, all positive: {:?}",
                self.widths
            )));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch size must be ≥ 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Inputs as rows of a matrix with one class label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledData {
    pub inputs: Matrix,
    pub labels: Vec<usize>,
}

impl LabeledData {
    pub fn new(inputs: Matrix, labels: Vec<usize>) -> Result<Self> {
        if inputs.rows() != labels.len() {
            return Err(Error::BadLength {
                what: "labels",
                len: labels.len(),
                expected: inputs.rows(),
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows `idx` as a new dataset.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let cols = self.inputs.cols();
        let mut data = Vec::with_capacity(idx.len() * cols);
        let mut labels = Vec::with_capacity(idx.len());
        for &i in idx {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.len(),
                });
            }
            data.extend_from_slice(self.inputs.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Self {
            inputs: Matrix::from_raw(idx.len(), cols, data),
            labels,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean cross-entropy over the epoch's minibatches, before each update.
    pub mean_loss: f64,
    /// Training accuracy after the epoch.
    pub accuracy: f64,
}

/// Gradient of the mean loss for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Glorot-uniform weights, zero biases.
pub fn glorot_init(widths: &[usize], seed: u64) -> Result<MlpNetwork> {
    TrainConfig::new(widths.to_vec()).validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = widths
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
            let data = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..=limit))
                .collect();
            Layer::new(Matrix::from_raw(fan_out, fan_in, data), Vector::zeros(fan_out))
        })
        .collect::<Result<Vec<_>>>()?;
    MlpNetwork::new(layers)
}

fn check_labels(labels: &[usize], classes: usize) -> Result<()> {
    match labels.iter().find(|&&l| l >= classes) {
        Some(&label) => Err(Error::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}

/// Batch forward pass keeping pre-activations of every layer.
fn forward_batch(net: &MlpNetwork, inputs: &Matrix) -> Vec<Matrix> {
    let m = net.depth();
    let mut raw: Vec<Matrix> = Vec::with_capacity(m);
    for (i, layer) in net.layers().iter().enumerate() {
        let prev = if i == 0 { inputs } else { &raw[i - 1] };
        let mut z = Matrix::zeros(prev.rows(), layer.outputs());
        for r in 0..z.rows() {
            z.row_mut(r).copy_from_slice(&layer.bias);
        }
        if i == 0 {
            linalg::gemm(prev.view(), layer.weight.view().t(), 1.0, &mut z);
        } else {
            let act: Vec<f64> = prev.as_slice().iter().map(|&v| relu(v)).collect();
            let view = linalg::View::row_major(&act, prev.rows(), prev.cols());
            linalg::gemm(view, layer.weight.view().t(), 1.0, &mut z);
        }
        raw.push(z);
    }
    raw
}

/// Mean softmax cross-entropy over the rows of `inputs` and its gradient with
/// respect to every weight and bias, by backpropagation.
pub fn loss_and_gradients(
    net: &MlpNetwork,
    inputs: &Matrix,
    labels: &[usize],
) -> Result<(f64, Vec<LayerGradient>)> {
    if inputs.cols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "training batch",
            left: inputs.shape(),
            right: net.layers()[0].weight.shape(),
        });
    }
    if inputs.rows() != labels.len() || labels.is_empty() {
        return Err(Error::BadLength {
            what: "labels",
            len: labels.len(),
            expected: inputs.rows(),
        });
    }
    check_labels(labels, net.num_classes())?;
    let batch = inputs.rows();
    let raw = forward_batch(net, inputs);
    let m = net.depth();

    // delta = (softmax − onehot) / B
    let logits = &raw[m - 1];
    let k = logits.cols();
    let mut delta = Matrix::zeros(batch, k);
    let mut loss = 0.0;
    for r in 0..batch {
        let row = logits.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = row.iter().map(|&l| libm::exp(l - max)).sum();
        let log_total = libm::log(total);
        loss += log_total - (row[labels[r]] - max);
        let out = delta.row_mut(r);
        for (c, o) in out.iter_mut().enumerate() {
            *o = libm::exp(row[c] - max - log_total) / batch as f64;
        }
        out[labels[r]] -= 1.0 / batch as f64;
    }
    loss /= batch as f64;

    let mut grads = Vec::with_capacity(m);
    for i in (0..m).rev() {
        let layer = &net.layers()[i];
        let act: Vec<f64> = if i == 0 {
            inputs.as_slice().to_vec()
        } else {
            raw[i - 1].as_slice().iter().map(|&v| relu(v)).collect()
        };
        let act_view = linalg::View::row_major(&act, batch, layer.inputs());
        let mut gw = Matrix::zeros(layer.outputs(), layer.inputs());
        linalg::gemm(delta.view().t(), act_view, 0.0, &mut gw);
        let mut gb = vec![0.0; layer.outputs()];
        for r in 0..batch {
            for (b, d) in gb.iter_mut().zip(delta.row(r)) {
                *b += d;
            }
        }
        grads.push(LayerGradient {
            weight: gw,
            bias: gb,
        });
        if i > 0 {
            let mut back = Matrix::zeros(batch, layer.inputs());
            linalg::gemm(delta.view(), layer.weight.view(), 0.0, &mut back);
            for (b, z) in back.as_mut_slice().iter_mut().zip(raw[i - 1].as_slice()) {
                if *z < 0.0 {
                    *b = 0.0;
                }
            }
            delta = back;
        }
    }
    grads.reverse();
    Ok((loss, grads))
}

/// Fraction of rows whose predicted class equals the label.
pub fn accuracy(net: &MlpNetwork, data: &LabeledData) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("accuracy of an empty dataset".into()));
    }
    let mut correct = 0usize;
    let chunk = 1024;
    let cols = data.inputs.cols();
    let mut start = 0;
    while start < data.len() {
        let end = (start + chunk).min(data.len());
        let rows = Matrix::from_raw(
            end - start,
            cols,
            data.inputs.as_slice()[start * cols..end * cols].to_vec(),
        );
        let logits = net.logits_batch(&rows)?;
        correct += (0..logits.rows())
            .filter(|&r| predicted_class(logits.row(r)) == data.labels[start + r])
            .count();
        start = end;
    }
    Ok(correct as f64 / data.len() as f64)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(net: &MlpNetwork) -> Self {
        let sizes: Vec<usize> = net
            .layers()
            .iter()
            .flat_map(|l| [l.weight.as_slice().len(), l.bias.dim()])
            .collect();
        Self {
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut MlpNetwork, grads: &[LayerGradient], cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(cfg.adam_beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(cfg.adam_beta2, self.t as f64);
        let lr = cfg.learning_rate;
        let params = net.params_mut();
        let gs = grads.iter().flat_map(|g| [g.weight.as_slice(), g.bias.as_slice()]);
        for (((p, g), m), v) in params.zip(gs).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..p.len() {
                m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
                v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                p[i] -= lr * mh / (libm::sqrt(vh) + cfg.adam_eps);
            }
        }
    }
}

/// Trains `net` with Adam on shuffled minibatches, returning the trained
/// network and one log entry per epoch. `log` is called after every epoch.
pub fn train_with<F: FnMut(&EpochLog)>(
    net: &MlpNetwork,
    data: &LabeledData,
    cfg: &TrainConfig,
    mut log: F,
) -> Result<(MlpNetwork, Vec<EpochLog>)> {
    cfg.validate()?;
    if cfg.widths != net.widths() {
        return Err(Error::InvalidArgument(format!(
            "config widths {:?} do not match network widths {:?}",
            cfg.widths,
            net.widths()
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("training data is empty".into()));
    }
    if data.inputs.cols() != net.input_dim() {
        return Err(Error::DimensionMismatch {
            op: "training data",
            left: data.inputs.shape(),
            right: net.layers()[0].weight.shape(),
        });
    }
    check_labels(&data.labels, net.num_classes())?;

    let mut current = net.clone();
    let mut adam = Adam::new(net);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch = data.select(idx)?;
            let (loss, grads) = loss_and_gradients(&current, &batch.inputs, &batch.labels)?;
            loss_sum += loss * idx.len() as f64;
            adam.step(&mut current, &grads, cfg);
        }
        let params = current.layers().iter().flat_map(|l| [l.weight.as_slice(), l.bias.as_slice()]);
        if let Some(index) = params.flatten().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "trained parameters",
                index,
            });
        }
        let entry = EpochLog {
            epoch,
            mean_loss: loss_sum / data.len() as f64,
            accuracy: accuracy(&current, data)?,
        };
        log(&entry);
        logs.push(entry);
    }
    Ok((current, logs))
}

pub fn train(net: &MlpNetwork, data: &LabeledData, cfg: &TrainConfig) -> Result<(MlpNetwork, Vec<EpochLog>)> {
    train_with(net, data, cfg, |_| {})
}
