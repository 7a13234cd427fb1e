//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Trains its MNIST networks from scratch on every run.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relucert::commands::{bench_simplex, AttackParams};
use relucert::data::{load_labeled, rows, unit_direction};
use relucert::io::weights::save_weights;
use relucert_core::attacks::{deepfool, DeepFoolConfig};
use relucert_core::certificates::{
    box_min_abs_affine, decision_boundary_certificate, simplex_certificate, simplex_gradient,
    DecisionBoundaryCertifier,
};
use relucert_core::oracle::{enumerate_exact_2layer, grid_oracle, OracleStatus};
use relucert_core::region::compute_region;
use relucert_core::trainer::{accuracy, glorot_init, loss_and_gradients, train, LabeledData, TrainConfig};
use relucert_core::{Error, Layer, Matrix, MlpNetwork, Vector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_net(rng: &mut ChaCha8Rng, widths: &[usize]) -> MlpNetwork {
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

fn random_point(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_widths(rng: &mut ChaCha8Rng, depth: usize, max_width: usize, dim: usize, max_classes: usize) -> Vec<usize> {
    let mut widths = vec![dim];
    widths.extend((1..depth).map(|_| rng.gen_range(1..=max_width)));
    widths.push(rng.gen_range(2..=max_classes));
    widths
}

fn shifted(x: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(dir).map(|(a, d)| a + t * d).collect()
}

fn soundness() -> Outcome {
    const DIRECTIONS: usize = 10_000;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut probe_flips, mut df_flips, mut unbounded) = (0usize, 0usize, 0usize);
    for _ in 0..500 {
        let depth = rng.gen_range(2..=4);
        let dim = rng.gen_range(1..=16);
        let widths = random_widths(&mut rng, depth, 32, dim, 10);
        let net = random_net(&mut rng, &widths);
        for _ in 0..10 {
            let x = random_point(&mut rng, dim, 2.0);
            let cert = simplex_certificate(&net, &x).unwrap();
            if cert.value == 0.0 {
                continue;
            }
            // An unbounded certificate claims no flip anywhere; probe far out.
            let r = if cert.value.is_finite() {
                0.999 * cert.value
            } else {
                unbounded += 1;
                1e3
            };
            // Half the probes on the sphere of radius r, half inside it.
            let mut batch = Vec::with_capacity(DIRECTIONS * dim);
            for i in 0..DIRECTIONS {
                let dir = unit_direction(&mut rng, dim);
                let t = if i % 2 == 0 { r } else { r * rng.gen::<f64>() };
                batch.extend(shifted(&x, &dir, t));
            }
            let classes = net.predict_batch(&Matrix::new(DIRECTIONS, dim, batch).unwrap()).unwrap();
            probe_flips += classes.iter().filter(|&&c| c != cert.predicted).count();

            let cfg = DeepFoolConfig {
                radius_cap: Some(r),
                ..DeepFoolConfig::default()
            };
            let df = deepfool(&net, &x, &cfg).unwrap();
            if df.success && df.distance <= r {
                df_flips += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        probe_flips == 0 && df_flips == 0 && elapsed <= Duration::from_secs(300),
        format!(
            "5000 inputs; probe flips {probe_flips}, DeepFool flips {df_flips}, \
             unbounded certificates {unbounded}, {:.1} s (limit 300 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn oracle_sandwich() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let (mut violations, mut no_adversarial, mut exact_checked) = (0usize, 0usize, 0usize);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..200 {
        let hidden = rng.gen_range(1..=6);
        let classes = rng.gen_range(2..=4);
        let net = random_net(&mut rng, &[2, hidden, classes]);
        let u = random_point(&mut rng, 2, 1.0);
        let simplex = simplex_certificate(&net, &u).unwrap().value;
        let db = decision_boundary_certificate(&net, &u).unwrap().value;
        // Exact enumeration handles two classes only.
        if classes == 2 {
            let exact = enumerate_exact_2layer(&net, &u).unwrap();
            exact_checked += 1;
            if simplex > exact + 1e-9 || db > exact + 1e-9 {
                violations += 1;
            }
        }
        let mut radius = 2.0;
        let mut grid = grid_oracle(&net, &u, radius, 4).unwrap();
        while grid.status == OracleStatus::NoAdversarialInBox && radius < 512.0 {
            radius *= 4.0;
            grid = grid_oracle(&net, &u, radius, 4).unwrap();
        }
        if grid.status == OracleStatus::NoAdversarialInBox {
            no_adversarial += 1;
            continue;
        }
        let bound = grid.distance_upper + grid.resolution;
        if simplex > bound || db > bound {
            violations += 1;
        }
        worst_gap = worst_gap.max(simplex.max(db) - grid.distance_upper);
    }
    let elapsed = start.elapsed();
    outcome(
        violations == 0 && elapsed <= Duration::from_secs(180),
        format!(
            "200 nets ({exact_checked} also vs exact); violations {violations}, constant-class nets {no_adversarial}, \
             max(cert - grid_upper) {worst_gap:.3e}, {:.1} s (limit 180 s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn local_linearity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let (mut worst, mut bad_rows) = (0.0f64, 0usize);
    for _ in 0..1000 {
        let depth = rng.gen_range(2..=5);
        let dim = rng.gen_range(1..=16);
        let widths = random_widths(&mut rng, depth, 32, dim, 10);
        let net = random_net(&mut rng, &widths);
        let x = random_point(&mut rng, dim, 2.0);
        let bundle = compute_region(&net, &x).unwrap();
        if bundle.region.p().rows() != net.hidden_units() {
            bad_rows += 1;
        }
        let p_min = simplex_certificate(&net, &x).unwrap().p_min;
        let reach = if p_min.is_finite() { 0.99 * p_min } else { 10.0 };
        for _ in 0..20 {
            let dir = unit_direction(&mut rng, dim);
            let y = shifted(&x, &dir, reach * rng.gen::<f64>());
            let logits = net.logits(&y).unwrap();
            let local = bundle.decision.evaluate(&y).unwrap();
            for (a, b) in logits.as_slice().iter().zip(local.as_slice()) {
                worst = worst.max((a - b).abs() / a.abs().max(1.0));
            }
        }
    }
    outcome(
        worst <= 1e-8 && bad_rows == 0,
        format!("20000 probes; max relative error {worst:.3e} (tol 1e-8), face-count mismatches {bad_rows}"),
    )
}

fn relaxation_ordering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mut pairs, mut violations) = (0usize, 0usize);
    for _ in 0..100 {
        let dim = rng.gen_range(1..=8);
        let hidden = rng.gen_range(1..=12);
        let classes = rng.gen_range(2..=5);
        let net = random_net(&mut rng, &[dim, hidden, classes]);
        let u = random_point(&mut rng, dim, 2.0);
        let certifier = DecisionBoundaryCertifier::new(&net).unwrap();
        let z1 = net.forward(&u).unwrap().raw[0].clone();
        for j in 0..classes {
            for k in 0..j {
                let (a, b) = certifier.numerator_coefficients(z1.as_slice(), j, k);
                let (relaxed, _) = box_min_abs_affine(&a, b);
                let binary = (0u32..1 << hidden)
                    .map(|mask| {
                        let s: f64 = (0..hidden).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).sum();
                        (s + b).abs()
                    })
                    .fold(f64::INFINITY, f64::min);
                pairs += 1;
                if relaxed > binary + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{pairs} class pairs; violations {violations}"))
}

fn mnist_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist").join(name)
}

struct Mnist {
    train: LabeledData,
    test: LabeledData,
}

fn load_mnist(binary: bool) -> Mnist {
    let load = |images: &str, labels: &str| load_labeled(&mnist_path(images), &mnist_path(labels), binary).unwrap();
    Mnist {
        train: load("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
        test: load("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
    }
}

fn train_net(widths: &[usize], epochs: usize, seed: u64, data: &LabeledData) -> (MlpNetwork, f64) {
    let start = Instant::now();
    let mut cfg = TrainConfig::new(widths.to_vec());
    cfg.epochs = epochs;
    cfg.seed = seed;
    let init = glorot_init(widths, seed).unwrap();
    let (net, _) = train(&init, data, &cfg).unwrap();
    (net, start.elapsed().as_secs_f64())
}

/// Count of the first `n` test samples where simplex ≤ DeepFool, plus the
/// number where DeepFool failed outright.
fn simplex_below_deepfool(net: &MlpNetwork, test: &LabeledData, n: usize) -> (usize, usize) {
    let cfg = AttackParams::default().deepfool();
    let (mut ok, mut failed) = (0, 0);
    for i in 0..n {
        let x = test.inputs.row(i);
        let value = simplex_certificate(net, x).unwrap().value;
        let df = deepfool(net, x, &cfg).unwrap();
        if !df.success {
            failed += 1;
        }
        if value <= df.distance {
            ok += 1;
        }
    }
    (ok, failed)
}

fn fig_two_layer(mnist: &Mnist, weights_out: &Path) -> Outcome {
    let (net, secs) = train_net(&[784, 1024, 2], 20, 1, &mnist.train);
    save_weights(&net, weights_out).unwrap();
    let acc = accuracy(&net, &mnist.test).unwrap();
    let (ok, failed) = simplex_below_deepfool(&net, &mnist.test, 200);
    let certifier = DecisionBoundaryCertifier::new(&net).unwrap();
    let above_db = (0..200)
        .filter(|&i| {
            let x = mnist.test.inputs.row(i);
            simplex_certificate(&net, x).unwrap().value >= certifier.certify(x).unwrap().value
        })
        .count();
    outcome(
        ok == 200 && acc >= 0.95,
        format!(
            "[784,1024,2] trained {secs:.0} s, test accuracy {acc:.4} (gate 0.95); simplex <= DeepFool \
             {ok}/200 (DeepFool failures {failed}); simplex >= decision boundary {above_db}/200 \
             ({}, soft)",
            if 2 * above_db > 200 { "majority" } else { "minority" }
        ),
    )
}

fn fig_three_layer(mnist: &Mnist) -> Outcome {
    let (net, secs) = train_net(&[784, 1024, 512, 10], 20, 2, &mnist.train);
    let acc = accuracy(&net, &mnist.test).unwrap();
    let (ok, failed) = simplex_below_deepfool(&net, &mnist.test, 200);
    let refused = matches!(DecisionBoundaryCertifier::new(&net), Err(Error::UnsupportedArchitecture(_)));
    outcome(
        ok == 200 && refused,
        format!(
            "[784,1024,512,10] trained {secs:.0} s, test accuracy {acc:.4}; simplex <= DeepFool \
             {ok}/200 (DeepFool failures {failed}); decision boundary refused: {refused}"
        ),
    )
}

fn timing(mnist: &Mnist) -> Outcome {
    let inputs = rows(&mnist.test.inputs, 0..100);
    let mut means = Vec::new();
    for (depth, seed) in [(3, 3), (4, 4)] {
        let mut widths = vec![784];
        widths.extend(std::iter::repeat(1024).take(depth));
        widths.push(10);
        let (net, _) = train_net(&widths, 1, seed, &mnist.train);
        means.push(bench_simplex(&net, &inputs).unwrap().mean);
    }
    outcome(
        means[0] <= 0.05 && means[1] >= means[0],
        format!(
            "mean over 100 samples, single thread: 3x[1024] {:.4} s (limit 0.05), 4x[1024] {:.4} s",
            means[0], means[1]
        ),
    )
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let h = 1e-5;

    let (mut cert_checked, mut cert_worst) = (0usize, 0.0f64);
    while cert_checked < 100 {
        let depth = rng.gen_range(2..=4);
        let dim = rng.gen_range(1..=8);
        let widths = random_widths(&mut rng, depth, 12, dim, 5);
        let net = random_net(&mut rng, &widths);
        let x = random_point(&mut rng, dim, 2.0);
        let g = simplex_gradient(&net, &x).unwrap();
        if g.at_kink || !g.value.is_finite() || g.value < 1e-3 {
            continue;
        }
        let mut errors = Vec::with_capacity(dim);
        let mut smooth = true;
        for i in 0..dim {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fp = simplex_certificate(&net, &xp).unwrap().value;
            let fm = simplex_certificate(&net, &xm).unwrap().value;
            // Curvature across the stencil means a kink sits inside it.
            smooth &= (fp + fm - 2.0 * g.value).abs() < 1e-9;
            errors.push(((fp - fm) / (2.0 * h) - g.grad[i]).abs());
        }
        if smooth {
            cert_checked += 1;
            cert_worst = errors.into_iter().fold(cert_worst, f64::max);
        }
    }

    let mut bp_worst = 0.0f64;
    for _ in 0..100 {
        let depth = rng.gen_range(2..=4);
        let dim = rng.gen_range(1..=6);
        let widths = random_widths(&mut rng, depth, 8, dim, 5);
        let net = random_net(&mut rng, &widths);
        let batch = rng.gen_range(1..=6);
        let x = Matrix::new(batch, dim, random_point(&mut rng, batch * dim, 1.0)).unwrap();
        let labels: Vec<usize> = (0..batch).map(|_| rng.gen_range(0..net.num_classes())).collect();
        let (_, grads) = loss_and_gradients(&net, &x, &labels).unwrap();
        let li = rng.gen_range(0..net.depth());
        let layer = &net.layers()[li];
        let n_weights = layer.weight.as_slice().len();
        let idx = rng.gen_range(0..n_weights + layer.outputs());
        let bump = |delta: f64| {
            let mut layers = net.layers().to_vec();
            if idx < n_weights {
                let mut w = layers[li].weight.as_slice().to_vec();
                w[idx] += delta;
                layers[li].weight = Matrix::new(layer.outputs(), layer.inputs(), w).unwrap();
            } else {
                let mut b = layers[li].bias.as_slice().to_vec();
                b[idx - n_weights] += delta;
                layers[li].bias = Vector::new(b).unwrap();
            }
            loss_and_gradients(&MlpNetwork::new(layers).unwrap(), &x, &labels).unwrap().0
        };
        let fd = (bump(h) - bump(-h)) / (2.0 * h);
        let g = if idx < n_weights {
            grads[li].weight.as_slice()[idx]
        } else {
            grads[li].bias.as_slice()[idx - n_weights]
        };
        bp_worst = bp_worst.max((fd - g).abs() / g.abs().max(1e-3));
    }
    outcome(
        cert_worst <= 1e-4 && bp_worst <= 1e-4,
        format!(
            "certificate: 100 smooth instances, max abs error {cert_worst:.2e}; \
             backprop: 100 instances, max rel error {bp_worst:.2e} (tol 1e-4)"
        ),
    )
}

fn determinism(weights: &Path, dir: &Path) -> Outcome {
    let run = |threads: &str, tag: &str| {
        let out = dir.join(format!("report-{threads}-{tag}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_relucert"))
            .args(["certify", "--weights"])
            .arg(weights)
            .arg("--images")
            .arg(mnist_path("t10k-images-idx3-ubyte.gz"))
            .arg("--labels")
            .arg(mnist_path("t10k-labels-idx1-ubyte.gz"))
            .args(["--binary", "--samples", "0..40", "--attacks", "--probes", "100", "--seed", "9"])
            .args(["--threads", threads, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        (status.status.code(), std::fs::read(&out).unwrap_or_default())
    };
    let runs = [run("1", "a"), run("1", "b"), run("8", "a"), run("8", "b")];
    let all_ok = runs.iter().all(|(code, bytes)| *code == Some(0) && !bytes.is_empty());
    let identical = runs.iter().all(|r| r.1 == runs[0].1);
    outcome(
        all_ok && identical,
        format!(
            "40 samples with attacks, 2 runs each at 1 and 8 threads; exit codes {:?}; identical: {identical}",
            runs.iter().map(|r| r.0).collect::<Vec<_>>()
        ),
    )
}

fn main() -> ExitCode {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).unwrap();
    let weights = dir.join("mnist-binary.rluc");

    let report = |n: usize, name: &str, o: Outcome| {
        println!("{} {n} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        o.pass
    };
    let mut passed = vec![
        report(1, "soundness", soundness()),
        report(2, "oracle sandwich", oracle_sandwich()),
        report(3, "local linearity", local_linearity()),
        report(4, "relaxation ordering", relaxation_ordering()),
    ];
    let binary = load_mnist(true);
    passed.push(report(5, "two-layer MNIST-binary", fig_two_layer(&binary, &weights)));
    drop(binary);
    let digits = load_mnist(false);
    passed.push(report(6, "three-layer MNIST", fig_three_layer(&digits)));
    passed.push(report(7, "timing", timing(&digits)));
    drop(digits);
    passed.push(report(8, "gradient checks", gradients()));
    passed.push(report(9, "determinism", determinism(&weights, &dir)));

    let failures = passed.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", passed.len() - failures, passed.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
