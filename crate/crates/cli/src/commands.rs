//! Subcommands. Each `cmd_*` loads its inputs, does the work and writes its
//! outputs; the pieces the acceptance suite reuses are public functions.

use std::io::Write;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;
use relucert_core::attacks::{deepfool, iterative_fgsm, DeepFoolConfig, FgsmConfig};
use relucert_core::certificates::{simplex_certificate, DecisionBoundaryCertifier};
use relucert_core::oracle::{enumerate_exact_2layer, grid_oracle, OracleStatus};
use relucert_core::trainer::{accuracy, glorot_init, train_with, LabeledData, TrainConfig};
use relucert_core::{Error as CoreError, Matrix, MlpNetwork};

use crate::data::{self, load_labeled, parse_clip, parse_range, resolve_range, sample_rng, unit_direction};
use crate::io::idx::load_idx_images;
use crate::io::report::{format_float, summarize, write_report, CertRecord};
use crate::io::weights::{load_weights, save_weights};

/// Exit code when a certificate exceeds an attack distance or a probe flips
/// the class inside the certified ball.
pub const EXIT_SOUNDNESS: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "relucert", version, about = "Robustness certificates for ReLU classifiers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a network with Adam on an IDX dataset.
    Train(TrainArgs),
    /// Certify samples and write a CSV report.
    Certify(CertifyArgs),
    /// Run DeepFool and iterative FGSM on samples.
    Attack(AttackArgs),
    /// Compare certificates with brute-force oracles on a tiny network.
    Oracle(OracleArgs),
    /// Time the simplex certificate, single-threaded.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// Relabel digits as two classes: 1 for 5-9, 0 for 0-4.
    #[arg(long)]
    pub binary: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Layer widths, input first, e.g. 784,1024,2.
    #[arg(long, value_delimiter = ',', required = true)]
    pub widths: Vec<usize>,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 20)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight file to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AttackParams {
    #[arg(long, default_value_t = 0.02)]
    pub df_overshoot: f64,
    #[arg(long, default_value_t = 100)]
    pub df_iters: usize,
    #[arg(long, default_value_t = 0.01)]
    pub fgsm_step: f64,
    #[arg(long, default_value_t = 1000)]
    pub fgsm_iters: usize,
    #[arg(long, default_value_t = 20)]
    pub fgsm_bisections: usize,
    /// Keep attack iterates in [LO, HI] per coordinate.
    #[arg(long, value_parser = parse_clip)]
    pub clip: Option<(f64, f64)>,
}

impl Default for AttackParams {
    fn default() -> Self {
        let df = DeepFoolConfig::default();
        let fg = FgsmConfig::default();
        Self {
            df_overshoot: df.overshoot,
            df_iters: df.max_iters,
            fgsm_step: fg.step,
            fgsm_iters: fg.max_iters,
            fgsm_bisections: fg.bisections,
            clip: None,
        }
    }
}

impl AttackParams {
    pub fn deepfool(&self) -> DeepFoolConfig {
        DeepFoolConfig {
            overshoot: self.df_overshoot,
            max_iters: self.df_iters,
            clip: self.clip,
            radius_cap: None,
        }
    }

    pub fn fgsm(&self) -> FgsmConfig {
        FgsmConfig {
            step: self.fgsm_step,
            max_iters: self.fgsm_iters,
            bisections: self.fgsm_bisections,
            clip: self.clip,
        }
    }
}

#[derive(Debug, Args)]
pub struct CertifyArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Half-open sample range A..B; either end may be omitted.
    #[arg(long, value_parser = parse_range, default_value = "..")]
    pub samples: Range<usize>,
    /// Also run DeepFool and iterative FGSM and check the certificates
    /// against them.
    #[arg(long)]
    pub attacks: bool,
    /// Random directions probed at 0.999 × the simplex value per sample.
    #[arg(long, default_value_t = 0)]
    pub probes: usize,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fill the wall_time_us column (makes the report run-dependent).
    #[arg(long)]
    pub record_time: bool,
    #[command(flatten)]
    pub attack: AttackParams,
}

#[derive(Debug, Args)]
pub struct AttackArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_parser = parse_range, default_value = "..")]
    pub samples: Range<usize>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// CSV output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub attack: AttackParams,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Network with at most 3 inputs. Without it a random two-input network
    /// with `--hidden` units is drawn from `--seed`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    /// Random inputs drawn uniformly from [-1, 1]^D.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 2.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 4)]
    pub levels: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub weights: PathBuf,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, value_parser = parse_range, default_value = "0..100")]
    pub samples: Range<usize>,
}

/// Runs `f` over `0..n` on `threads` workers and returns results in index
/// order.
pub fn par_map<R: Send>(n: usize, threads: usize, f: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut parts: Vec<(usize, R)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                s.spawn(|| {
                    let mut mine = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break mine;
                        }
                        mine.push((i, f(i)));
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    parts.sort_by_key(|p| p.0);
    parts.into_iter().map(|p| p.1).collect()
}

#[derive(Debug, Clone, Default)]
pub struct CertifyOptions {
    pub attacks: Option<AttackParams>,
    pub probes: usize,
    pub seed: u64,
    pub record_time: bool,
}

/// One certified sample plus any soundness violations found for it.
#[derive(Debug, Clone)]
pub struct CertifiedSample {
    pub record: CertRecord,
    pub violations: Vec<String>,
}

fn certify_one(
    net: &MlpNetwork,
    db: Option<&DecisionBoundaryCertifier<'_>>,
    x: &[f64],
    sample_id: usize,
    true_label: usize,
    opts: &CertifyOptions,
) -> Result<CertifiedSample> {
    let start = Instant::now();
    let cert = simplex_certificate(net, x)?;
    let elapsed = start.elapsed();
    let db_cert = db.map(|c| c.certify(x)).transpose()?.map(|c| c.value);
    let mut violations = Vec::new();

    let (mut df_dist, mut fg_dist) = (None, None);
    if let Some(params) = &opts.attacks {
        let df = deepfool(net, x, &params.deepfool())?;
        let fg = iterative_fgsm(net, x, &params.fgsm())?;
        df_dist = Some(df.distance);
        fg_dist = Some(fg.distance);
        for (attack, dist) in [("deepfool", df.distance), ("ifgsm", fg.distance)] {
            if cert.value > dist {
                violations.push(format!(
                    "sample {sample_id}: simplex {} > {attack} {}",
                    cert.value, dist
                ));
            }
            if let Some(v) = db_cert.filter(|&v| v > dist) {
                violations.push(format!("sample {sample_id}: db_cert {v} > {attack} {dist}"));
            }
        }
    }
    if opts.probes > 0 && cert.value.is_finite() && cert.value > 0.0 {
        let mut rng = sample_rng(opts.seed, sample_id);
        let r = 0.999 * cert.value;
        let dim = x.len();
        let mut batch = Vec::with_capacity(opts.probes * dim);
        for _ in 0..opts.probes {
            let dir = unit_direction(&mut rng, dim);
            batch.extend(x.iter().zip(&dir).map(|(a, d)| a + r * d));
        }
        let classes = net.predict_batch(&Matrix::new(opts.probes, dim, batch)?)?;
        let flips = classes.iter().filter(|&&c| c != cert.predicted).count();
        if flips > 0 {
            violations.push(format!(
                "sample {sample_id}: {flips} probes flip the class at radius {r}"
            ));
        }
    }
    Ok(CertifiedSample {
        record: CertRecord {
            sample_id,
            true_label,
            predicted: cert.predicted,
            p_min: cert.p_min,
            d_min: cert.d_min,
            simplex: cert.value,
            db_cert,
            deepfool: df_dist,
            ifgsm: fg_dist,
            wall_time_us: opts.record_time.then_some(elapsed.as_micros() as u64),
        },
        violations,
    })
}

/// Certifies rows `range` of `data`; results come back in sample order
/// whatever the thread count.
pub fn certify_samples(
    net: &MlpNetwork,
    data: &LabeledData,
    range: Range<usize>,
    opts: &CertifyOptions,
    threads: usize,
) -> Result<Vec<CertifiedSample>> {
    if data.inputs.cols() != net.input_dim() {
        bail!(
            "network expects {} inputs, dataset rows have {}",
            net.input_dim(),
            data.inputs.cols()
        );
    }
    let db = if net.depth() == 2 {
        Some(DecisionBoundaryCertifier::new(net)?)
    } else {
        None
    };
    let start = range.start;
    par_map(range.len(), threads, |i| {
        let id = start + i;
        certify_one(net, db.as_ref(), data.inputs.row(id), id, data.labels[id], opts)
    })
    .into_iter()
    .collect()
}

fn check_labels_fit(net: &MlpNetwork, data: &LabeledData) -> Result<()> {
    if let Some(&l) = data.labels.iter().find(|&&l| l >= net.num_classes()) {
        bail!(
            "label {l} does not fit a {}-class network (use --binary for two-class MNIST)",
            net.num_classes()
        );
    }
    Ok(())
}

pub fn cmd_certify(args: &CertifyArgs) -> Result<u8> {
    let net = load_weights(&args.weights).with_context(|| format!("loading {}", args.weights.display()))?;
    let data = load_labeled(&args.data.images, &args.data.labels, args.data.binary)?;
    check_labels_fit(&net, &data)?;
    let range = resolve_range(&args.samples, data.len())?;
    let opts = CertifyOptions {
        attacks: args.attacks.then(|| args.attack.clone()),
        probes: args.probes,
        seed: args.seed,
        record_time: args.record_time,
    };
    let results = certify_samples(&net, &data, range, &opts, args.threads)?;
    let records: Vec<CertRecord> = results.iter().map(|r| r.record.clone()).collect();
    write_report(&records, &args.out)?;
    println!("{}", summarize(&records));
    let violations: Vec<&String> = results.iter().flat_map(|r| &r.violations).collect();
    for v in &violations {
        eprintln!("soundness violation: {v}");
    }
    Ok(if violations.is_empty() { 0 } else { EXIT_SOUNDNESS })
}

pub fn cmd_train(args: &TrainArgs) -> Result<u8> {
    let data = load_labeled(&args.data.images, &args.data.labels, args.data.binary)?;
    let test = match (&args.test_images, &args.test_labels) {
        (Some(i), Some(l)) => Some(load_labeled(i, l, args.data.binary)?),
        (None, None) => None,
        _ => bail!("--test-images and --test-labels go together"),
    };
    let cfg = TrainConfig {
        widths: args.widths.clone(),
        batch_size: args.batch_size,
        epochs: args.epochs,
        learning_rate: args.lr,
        adam_beta1: args.beta1,
        adam_beta2: args.beta2,
        adam_eps: args.adam_eps,
        seed: args.seed,
    };
    let init = glorot_init(&cfg.widths, args.seed)?;
    check_labels_fit(&init, &data)?;
    let (net, _) = train_with(&init, &data, &cfg, |e| {
        println!(
            "epoch {}/{} loss={:.6} train_acc={:.4}",
            e.epoch, cfg.epochs, e.mean_loss, e.accuracy
        );
    })?;
    if let Some(test) = &test {
        println!("test_acc={:.4}", accuracy(&net, test)?);
    }
    save_weights(&net, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn csv_out(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(p) => Box::new(std::io::BufWriter::new(
            std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    };
    Ok(csv::Writer::from_writer(sink))
}

pub fn cmd_attack(args: &AttackArgs) -> Result<u8> {
    let net = load_weights(&args.weights).with_context(|| format!("loading {}", args.weights.display()))?;
    let data = load_labeled(&args.data.images, &args.data.labels, args.data.binary)?;
    let range = resolve_range(&args.samples, data.len())?;
    let (dfc, fgc) = (args.attack.deepfool(), args.attack.fgsm());
    let start = range.start;
    let rows = par_map(range.len(), args.threads, |i| -> Result<_> {
        let x = data.inputs.row(start + i);
        Ok((deepfool(&net, x, &dfc)?, iterative_fgsm(&net, x, &fgc)?))
    });
    let mut w = csv_out(args.out.as_deref())?;
    w.write_record(["sample_id", "attack", "distance", "iterations", "success"])?;
    for (i, row) in rows.into_iter().enumerate() {
        let (df, fg) = row?;
        for (name, r) in [("deepfool", df), ("ifgsm", fg)] {
            w.write_record([
                (start + i).to_string(),
                name.to_string(),
                format_float(r.distance),
                r.iterations_used.to_string(),
                r.success.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(0)
}

pub fn cmd_oracle(args: &OracleArgs) -> Result<u8> {
    let net = match &args.weights {
        Some(p) => load_weights(p).with_context(|| format!("loading {}", p.display()))?,
        None => {
            let mut rng = sample_rng(args.seed, 0);
            let widths = [2, args.hidden, args.classes];
            let mut layers = glorot_init(&widths, args.seed)?.layers().to_vec();
            for l in &mut layers {
                let b: Vec<f64> = (0..l.outputs()).map(|_| rng.gen_range(-0.5..0.5)).collect();
                l.bias = relucert_core::Vector::new(b)?;
            }
            MlpNetwork::new(layers)?
        }
    };
    let db = match DecisionBoundaryCertifier::new(&net) {
        Ok(c) => Some(c),
        Err(CoreError::UnsupportedArchitecture(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let exact_ok = net.depth() == 2 && net.num_classes() == 2 && net.hidden_units() <= 12;
    let mut rng = sample_rng(args.seed, 1);
    let mut w = csv_out(args.out.as_deref())?;
    w.write_record([
        "point", "simplex", "db_cert", "grid_lower", "grid_upper", "exact", "gap", "status",
    ])?;
    let mut violations = 0;
    for point in 0..args.points {
        let u: Vec<f64> = (0..net.input_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let simplex = simplex_certificate(&net, &u)?.value;
        let dbv = db.as_ref().map(|c| c.certify(&u)).transpose()?.map(|c| c.value);
        let grid = grid_oracle(&net, &u, args.radius, args.levels)?;
        let exact = if exact_ok {
            Some(enumerate_exact_2layer(&net, &u)?)
        } else {
            None
        };
        let bound = exact.unwrap_or(grid.distance_upper).min(grid.distance_upper);
        if simplex > bound || dbv.is_some_and(|v| v > bound) {
            violations += 1;
        }
        let status = match grid.status {
            OracleStatus::Found => "found",
            OracleStatus::NoAdversarialInBox => "no_adversarial_in_box",
        };
        w.write_record([
            point.to_string(),
            format_float(simplex),
            dbv.map(format_float).unwrap_or_default(),
            format_float(grid.distance_lower),
            format_float(grid.distance_upper),
            exact.map(format_float).unwrap_or_default(),
            format_float(bound - simplex),
            status.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(if violations == 0 { 0 } else { EXIT_SOUNDNESS })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchSummary {
    pub samples: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

/// Seconds per simplex certificate over the rows of `inputs`, after one
/// untimed warm-up call.
pub fn bench_simplex(net: &MlpNetwork, inputs: &Matrix) -> Result<BenchSummary> {
    if inputs.rows() == 0 {
        bail!("nothing to benchmark");
    }
    simplex_certificate(net, inputs.row(0))?;
    let mut times = Vec::with_capacity(inputs.rows());
    for i in 0..inputs.rows() {
        let t = Instant::now();
        let c = simplex_certificate(net, inputs.row(i))?;
        times.push(t.elapsed().as_secs_f64());
        std::hint::black_box(c);
    }
    times.sort_by(f64::total_cmp);
    let n = times.len();
    let median = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    let p95 = times[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
    Ok(BenchSummary {
        samples: n,
        mean: times.iter().sum::<f64>() / n as f64,
        median,
        p95,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let net = load_weights(&args.weights).with_context(|| format!("loading {}", args.weights.display()))?;
    let images = load_idx_images(&args.images).with_context(|| format!("loading {}", args.images.display()))?;
    let range = resolve_range(&args.samples, images.len())?;
    let s = bench_simplex(&net, &data::rows(&images.pixels, range))?;
    println!(
        "widths={:?} hidden_units={} samples={} mean_s={:.6} median_s={:.6} p95_s={:.6}",
        net.widths(),
        net.hidden_units(),
        s.samples,
        s.mean,
        s.median,
        s.p95
    );
    Ok(0)
}

pub fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Attack(a) => cmd_attack(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Bench(a) => cmd_bench(a),
    }
}
