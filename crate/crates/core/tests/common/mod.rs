#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use relucert_core::{Layer, Matrix, MlpNetwork, Vector};

/// Weights uniform in ±1/√fan_in, biases uniform in ±0.5.
pub fn random_net(rng: &mut ChaCha8Rng, widths: &[usize]) -> MlpNetwork {
    let layers = widths
        .windows(2)
        .map(|w| {
            let s = 1.0 / (w[0] as f64).sqrt();
            let data = (0..w[0] * w[1]).map(|_| rng.gen_range(-s..s)).collect();
            let bias = (0..w[1]).map(|_| rng.gen_range(-0.5..0.5)).collect();
            Layer::new(Matrix::new(w[1], w[0], data).unwrap(), Vector::new(bias).unwrap()).unwrap()
        })
        .collect();
    MlpNetwork::new(layers).unwrap()
}

pub fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Uniform direction on the unit sphere.
pub fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// `depth` weight layers; hidden widths in `1..=max_width`, classes in
/// `2..class_bound`.
pub fn random_widths(rng: &mut ChaCha8Rng, depth: usize, max_width: usize, dim: usize, class_bound: usize) -> Vec<usize> {
    let classes = rng.gen_range(2..class_bound);
    let mut widths = vec![dim];
    widths.extend((1..depth).map(|_| rng.gen_range(1..=max_width)));
    widths.push(classes);
    widths
}

pub fn add_scaled(x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, d)| a + t * d).collect()
}

/// Logits by a straight-line loop, independent of the library's kernels.
pub fn naive_logits(net: &MlpNetwork, x: &[f64]) -> Vec<f64> {
    let mut a = x.to_vec();
    let m = net.depth();
    for (i, layer) in net.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.outputs()];
        for r in 0..layer.outputs() {
            let mut s = layer.bias[r];
            for c in 0..layer.inputs() {
                s += layer.weight.get(r, c).unwrap() * a[c];
            }
            z[r] = if i + 1 < m { s.max(0.0) } else { s };
        }
        a = z;
    }
    a
}
