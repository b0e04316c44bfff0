use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use orbitpcqa_core::camera::{orbit_poses, OrbitId};
use orbitpcqa_core::cloud::{apply_distortion, read_ply, write_ply_file, DistortionKind, DistortionSpec, PlyFormat};
use orbitpcqa_core::harness::{
    build_cache, compare_models, load_manifest, predict_entry, predict_sequences, run_experiment, synth_dataset,
    train_fold, EvalReport, ExperimentConfig, ModelKind, Profile, SplitKind, SynthSpec, TrainedModel,
};
use orbitpcqa_core::metrics::{Criteria, DEFAULT_ALPHA};
use orbitpcqa_core::nn::{gradient_check, GradCheckScope, NetworkConfig, NetworkParams, Tensor};
use orbitpcqa_core::render::{capture_sequences, save_sequence};
use orbitpcqa_core::rng::Rng;
use orbitpcqa_core::sampling::{sample_eval_clip, ClipSpec};

#[derive(Parser)]
#[command(name = "orbitpcqa", version, about = "No-reference point cloud quality assessment from orbit videos")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Built-in defaults to start from.
    #[arg(long, default_value = "desk")]
    profile: Profile,
    /// JSON experiment config; replaces the profile defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured cache directory (ORBITPCQA_CACHE wins over both).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Overrides the configured number of training epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Single-threaded execution.
    #[arg(long)]
    deterministic: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::for_profile(self.profile),
        };
        if let Some(dir) = &self.cache_dir {
            config.cache_dir = Some(dir.clone());
        }
        if let Some(e) = self.epochs {
            config.epochs = e;
        }
        config.deterministic |= self.deterministic;
        config.validate()?;
        if config.deterministic {
            // Ignored if a pool already exists; experiments also pin their own.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(1).build_global();
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Render the A, B and C orbit sequences of a cloud into A.pcv, B.pcv, C.pcv.
    Capture {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Apply a synthetic distortion to a cloud.
    Distort {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// downsample, geometry_noise or color_quantize
        #[arg(long)]
        kind: String,
        #[arg(long)]
        level: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write ASCII instead of binary little-endian PLY.
        #[arg(long)]
        ascii: bool,
    },
    /// Generate the procedural noise-level dataset and its manifest.
    SynthDataset {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        contents: usize,
        /// Comma-separated noise levels relative to the cloud radius.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        #[arg(long, default_value_t = 4000)]
        points: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a network on every entry of a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Output weights file; label scaling goes next to it as .json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Predict quality scores for one cloud or every manifest entry.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        cloud: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Cross-validate a model and write <out>.json, <out>.csv and <out>.predictions.csv.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// loco or random82
        #[arg(long, default_value = "loco")]
        split: SplitKind,
        /// network, oracle or constant
        #[arg(long, default_value = "network")]
        model: ModelKind,
        /// Name recorded in the report (defaults to the model kind).
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Pairwise significance matrix over report JSON files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        reports: Vec<PathBuf>,
        /// CSV output for the matrix.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Finite-difference check of the network gradients in double precision.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        /// Fail when the maximum relative error exceeds this.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Quick end-to-end sanity checks.
    Selftest,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Capture { input, out, cfg } => capture(&input, &out, &cfg.resolve()?),
        Command::Distort { input, out, kind, level, seed, ascii } => distort(&input, &out, &kind, level, seed, ascii),
        Command::SynthDataset { out, contents, sigmas, points, seed } => {
            let mut spec = SynthSpec { contents, points, seed, ..SynthSpec::default() };
            if let Some(s) = sigmas {
                spec.sigmas = s;
            }
            let entries = synth_dataset(&spec, &out)?;
            println!("wrote {} entries to {}", entries.len(), out.join("manifest.csv").display());
            Ok(())
        }
        Command::Train { manifest, out, seed, cfg } => train(&manifest, &out, seed, &cfg.resolve()?),
        Command::Predict { model, cloud, manifest, cfg } => {
            predict(&model, cloud.as_deref(), manifest.as_deref(), &cfg.resolve()?)
        }
        Command::Evaluate { manifest, split, model, name, out, seed, cfg } => {
            evaluate(&manifest, split, model, name, &out, seed, &cfg.resolve()?)
        }
        Command::Compare { reports, out, alpha } => compare(&reports, out.as_deref(), alpha),
        Command::Gradcheck { seed, eps, tolerance } => gradcheck(seed, eps, tolerance),
        Command::Selftest => selftest(),
    }
}

fn capture(input: &Path, out: &Path, config: &ExperimentConfig) -> Result<()> {
    let cloud = read_ply(input).with_context(|| format!("reading {}", input.display()))?;
    std::fs::create_dir_all(out)?;
    for seq in capture_sequences(&cloud, &config.capture)? {
        let path = out.join(format!("{}.pcv", seq.orbit.name()));
        save_sequence(&seq, &path)?;
        println!("{}: {} frames {}x{}", path.display(), seq.len(), seq.width(), seq.height());
    }
    Ok(())
}

fn distort(input: &Path, out: &Path, kind: &str, level: f64, seed: u64, ascii: bool) -> Result<()> {
    let kind = match kind {
        "downsample" => DistortionKind::Downsample,
        "geometry_noise" => DistortionKind::GeometryNoise,
        "color_quantize" => DistortionKind::ColorQuantize,
        other => bail!("unknown distortion {other:?}, expected downsample, geometry_noise or color_quantize"),
    };
    let cloud = read_ply(input).with_context(|| format!("reading {}", input.display()))?;
    let spec = DistortionSpec::new(kind, level, seed)?;
    let result = apply_distortion(&cloud, &spec)?;
    let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
    write_ply_file(&result, format, out)?;
    println!("{} points -> {}", result.len(), out.display());
    Ok(())
}

fn train(manifest: &Path, out: &Path, seed: u64, config: &ExperimentConfig) -> Result<()> {
    let entries = load_manifest(manifest)?;
    let (cache, report) = build_cache(&entries, &config.capture, config.resolved_cache_dir())?;
    eprintln!("cache: {} rendered, {} reused", report.rendered, report.skipped);
    let refs: Vec<_> = entries.iter().collect();
    let outcome = train_fold(&refs, &cache, config, seed)?;
    for (epoch, loss) in outcome.loss_curve.iter().enumerate() {
        println!("epoch {:>3}  loss {loss:.6}", epoch + 1);
    }
    outcome.model.save(out)?;
    println!("saved {}", out.display());
    Ok(())
}

fn predict(model_path: &Path, cloud: Option<&Path>, manifest: Option<&Path>, config: &ExperimentConfig) -> Result<()> {
    let model = TrainedModel::load(model_path)?;
    if model.params.config != config.network {
        bail!("model network config does not match the selected profile or config");
    }
    if let Some(path) = cloud {
        let sequences = capture_sequences(&read_ply(path)?, &config.capture)?;
        println!("{:?}", predict_sequences(&model, &sequences, config)?);
        return Ok(());
    }
    let entries = load_manifest(manifest.expect("clap requires cloud or manifest"))?;
    let (cache, _) = build_cache(&entries, &config.capture, config.resolved_cache_dir())?;
    println!("id,predicted,mos");
    let mut predicted = Vec::with_capacity(entries.len());
    for e in &entries {
        let p = predict_entry(&model, e, &cache, config)?;
        println!("{},{p:?},{:?}", e.id, e.mos);
        predicted.push(p);
    }
    let labels: Vec<f64> = entries.iter().map(|e| e.mos).collect();
    if let Ok(c) = Criteria::compute_lenient(&predicted, &labels) {
        eprintln!("SRCC {:.4}  PLCC {:.4}  KRCC {:.4}  RMSE {:.4}", c.srcc, c.plcc, c.krcc, c.rmse);
    }
    Ok(())
}

fn evaluate(
    manifest: &Path,
    split: SplitKind,
    model: ModelKind,
    name: Option<String>,
    out: &Path,
    seed: u64,
    config: &ExperimentConfig,
) -> Result<()> {
    let entries = load_manifest(manifest)?;
    let mut report = run_experiment(&entries, split, config, seed, model)?;
    if let Some(name) = name {
        report.model = name;
    }
    let with_suffix = |suffix: &str| {
        let mut s = out.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(with_suffix(".json"), report.to_json())?;
    std::fs::write(with_suffix(".csv"), report.to_csv())?;
    std::fs::write(with_suffix(".predictions.csv"), report.predictions_csv())?;
    print!("{}", report.to_text());
    Ok(())
}

fn compare(paths: &[PathBuf], out: Option<&Path>, alpha: f64) -> Result<()> {
    let reports = paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(EvalReport::from_json(&text)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = compare_models(&reports, alpha)?;
    if let Some(out) = out {
        std::fs::write(out, matrix.to_csv())?;
    }
    print!("{}", matrix.to_text());
    Ok(())
}

fn gradcheck_setup(seed: u64) -> Result<(NetworkParams<f64>, Tensor<f64>, Vec<f64>)> {
    // Four samples per channel reach the last batch norm; with two its output
    // no longer depends on the input.
    let config = NetworkConfig { stage_channels: [2, 2, 2, 2], input_shape: [3, 4, 16, 16], ..NetworkConfig::desk() };
    let params = NetworkParams::<f64>::init(&config, seed)?;
    let mut rng = Rng::new(seed.wrapping_add(1));
    let input = Tensor::from_fn(&[4, 3, 4, 16, 16], |_| rng.next_f64());
    let labels = (0..4).map(|_| rng.next_f64()).collect();
    Ok((params, input, labels))
}

fn gradcheck(seed: u64, eps: f64, tolerance: f64) -> Result<()> {
    let (params, input, labels) = gradcheck_setup(seed)?;
    let report = gradient_check(&params, &input, &labels, eps, GradCheckScope::All)?;
    println!(
        "checked {} parameters, max relative error {:.3e} (tensor {}, element {})",
        report.checked, report.max_rel_error, report.worst.0, report.worst.1
    );
    if report.max_rel_error >= tolerance {
        bail!("gradient check failed: {:.3e} >= {tolerance:.1e}", report.max_rel_error);
    }
    Ok(())
}

fn selftest() -> Result<()> {
    let mut failures = 0;
    let mut check = |name: &str, outcome: Result<bool>| {
        let ok = matches!(outcome, Ok(true));
        if !ok {
            failures += 1;
        }
        let detail = match outcome {
            Err(e) => format!(" ({e:#})"),
            _ => String::new(),
        };
        println!("{} {name}{detail}", if ok { "PASS" } else { "FAIL" });
    };

    check("orbit frames orthonormal", (|| {
        let mut ok = true;
        for orbit in OrbitId::ALL {
            for p in orbit_poses(orbit, Default::default(), 3.0, 210)? {
                let r = p.right.cross(p.up);
                ok &= (p.forward.norm() - 1.0).abs() < 1e-12
                    && p.right.dot(p.forward).abs() < 1e-12
                    && (r + p.forward).norm() < 1e-12;
            }
        }
        Ok(ok)
    })());

    check("capture is deterministic", (|| {
        let cloud = orbitpcqa_core::harness::synth_shape(0, 500, 1);
        let capture = orbitpcqa_core::CaptureConfig { frames_per_orbit: 6, ..orbitpcqa_core::CaptureConfig::desk() };
        let a = capture_sequences(&cloud, &capture)?;
        let b = capture_sequences(&cloud, &capture)?;
        Ok(a == b && a.iter().all(|s| s.len() == 6))
    })());

    check("eval clip covers a stride grid", (|| {
        let clip = sample_eval_clip(&ClipSpec::default())?;
        Ok(clip.len() == 30 && clip.windows(2).all(|w| w[1] - w[0] == 7))
    })());

    check("perfect predictions score (1, 1, 1, 0)", (|| {
        let x: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = Criteria::compute(&x, &x)?;
        Ok((c.srcc - 1.0).abs() < 1e-12 && (c.plcc - 1.0).abs() < 1e-12 && (c.krcc - 1.0).abs() < 1e-12 && c.rmse == 0.0)
    })());

    check("head gradients match finite differences", (|| {
        let (params, input, labels) = gradcheck_setup(3)?;
        let r = gradient_check(&params, &input, &labels, 1e-5, GradCheckScope::HeadOnly)?;
        Ok(r.max_rel_error < 1e-6)
    })());

    if failures > 0 {
        bail!("{failures} self-test check(s) failed");
    }
    Ok(())
}
