//! Command-line front end.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::augmentation::{augment_samples, AugmentOptions};
use crate::cascade::{train, CascadeConfig};
use crate::error::{Error, Result};
use crate::evaluation::{ced_and_failure, normalized_error, ErrorNormalization, DEFAULT_FAILURE_THRESHOLD};
use crate::io::report::{
    read_ced, read_predictions, render_ced, render_ced_svg, render_errors, render_trace, write_predictions,
};
use crate::io::{atomic_write, create_dir, load_dataset, load_manifest, load_model, save_model, write_dataset};
use crate::shape::shape_to_bbox;
use crate::subspace::FuzzySchedule;
use crate::synthetic::{generate, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "dac-csr", version, about = "Cascaded shape regression with dynamic domain selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model from an annotated manifest.
    Train(TrainArgs),
    /// Detect landmarks for every entry of a manifest.
    Detect(DetectArgs),
    /// Score predictions against manifest annotations.
    Evaluate(EvaluateArgs),
    /// Write an augmented copy of a dataset.
    Augment(AugmentArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Plot a CED table as SVG.
    CedPlot(CedPlotArgs),
}

#[derive(Debug, Args)]
struct AugmentFlags {
    /// Add mirrored copies (needs a mirror_map in the manifest).
    #[arg(long)]
    flip: bool,
    /// Add Gaussian-blurred copies with this sigma in pixels.
    #[arg(long)]
    blur_sigma: Option<f64>,
    /// Synthetic poses generated per eligible sample.
    #[arg(long, default_value_t = 0)]
    synth_poses: usize,
    /// Only synthesize poses for samples whose yaw coefficient is within
    /// this many standard deviations of the mean.
    #[arg(long)]
    semi_frontal: Option<f64>,
    /// Jitter every face box by up to this fraction of its side.
    #[arg(long)]
    bbox_jitter: Option<f64>,
}

impl AugmentFlags {
    fn options(&self, seed: u64) -> AugmentOptions {
        AugmentOptions {
            flip: self.flip,
            blur_sigma: self.blur_sigma,
            synth_poses: self.synth_poses,
            semi_frontal: self.semi_frontal,
            bbox_jitter: self.bbox_jitter,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Annotated dataset manifest.
    #[arg(long)]
    manifest: PathBuf,
    /// Output model file.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    n_bbox_stages: usize,
    #[arg(long, default_value_t = 2)]
    n_general: usize,
    #[arg(long, default_value_t = 3)]
    n_domain: usize,
    /// Shape-subspace dimension; there are 2^K + 1 domains.
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 10000.0)]
    lambda: f64,
    /// Fuzzy schedule h(1),...,h(N_d), strictly decreasing in (0, 0.5).
    #[arg(long, value_delimiter = ',')]
    schedule: Option<Vec<f64>>,
    /// Initial boxes per training sample (the given box plus perturbed copies).
    #[arg(long, default_value_t = 1)]
    n_init: usize,
    #[arg(long, default_value_t = 0.05)]
    init_jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the per-stage training losses as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    augment: AugmentFlags,
}

#[derive(Debug, Args)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    /// Landmark CSV, one row per manifest entry.
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the domain label chosen at every domain stage.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Normalization {
    FaceSize,
    InterOcular,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Landmark CSV written by `detect`.
    #[arg(long)]
    predictions: PathBuf,
    /// Manifest with ground-truth landmarks.
    #[arg(long)]
    manifest: PathBuf,
    /// Directory for errors.csv, ced.csv and summary.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "face-size")]
    normalization: Normalization,
    /// Zero-based landmark indices of the two eyes (inter-ocular mode).
    #[arg(long, value_parser = parse_pair, value_name = "A,B")]
    eyes: Option<(usize, usize)>,
    #[arg(long, default_value_t = DEFAULT_FAILURE_THRESHOLD)]
    threshold: f64,
}

#[derive(Debug, Args)]
struct AugmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Output manifest; images go to an `images/` directory beside it.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    augment: AugmentFlags,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output manifest; images go to an `images/` directory beside it.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n_samples: usize,
    #[arg(long, default_value_t = 128)]
    image_size: usize,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pose_min: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pose_max: f64,
    /// Redraw latents with magnitude below this (bimodal poses).
    #[arg(long, default_value_t = 0.0)]
    pose_gap: f64,
    #[arg(long, default_value_t = 60.0)]
    max_yaw: f64,
    #[arg(long, default_value_t = 0.03)]
    texture_noise: f64,
    #[arg(long, default_value_t = 0.05)]
    box_jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct CedPlotArgs {
    /// ced.csv written by `evaluate`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected two indices as A,B")?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("{v:?}: {e}"));
    Ok((parse(a)?, parse(b)?))
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let schedule = match &a.schedule {
        Some(h) => FuzzySchedule::new(h.clone())?,
        None if a.n_domain == 3 => FuzzySchedule::default(),
        None if a.n_domain == 0 => FuzzySchedule::new(Vec::new())?,
        None => {
            return Err(Error::InvalidConfig(format!(
                "--n-domain {} needs an explicit --schedule with {} values",
                a.n_domain, a.n_domain
            )))
        }
    };
    let cfg = CascadeConfig {
        n_bbox_stages: a.n_bbox_stages,
        n_general: a.n_general,
        n_domain: a.n_domain,
        k: a.k,
        lambda: a.lambda,
        schedule,
        n_init: a.n_init,
        init_jitter: a.init_jitter,
        seed: a.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let (manifest, samples) = load_dataset(&a.manifest)?;
    let opts = a.augment.options(a.seed);
    let samples = if opts.is_noop() {
        samples
    } else {
        let out = augment_samples(&samples, &opts, manifest.mirror_map.as_ref())?;
        log::info!("augmented {} samples to {}", samples.len(), out.len());
        out
    };
    let (model, report) = train(&samples, &cfg)?;
    save_model(&a.out, &model)?;
    if let Some(path) = &a.report {
        atomic_write(path, serde_json::to_string_pretty(&report)?.as_bytes())?;
    }
    println!(
        "trained on {} instances; model written to {}",
        report.n_instances,
        a.out.display()
    );
    Ok(())
}

fn run_detect(a: &DetectArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let (_, samples) = load_dataset(&a.manifest)?;
    let results = model.detect_all(&samples)?;
    let fallbacks = results.iter().filter(|(_, t)| t.box_fallback).count();
    if fallbacks > 0 {
        log::warn!("{fallbacks} detections fell back to the input face box");
    }
    let (shapes, traces): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    write_predictions(&a.out, &shapes)?;
    if let Some(path) = &a.trace {
        atomic_write(path, render_trace(&traces).as_bytes())?;
    }
    println!("wrote {} predictions to {}", shapes.len(), a.out.display());
    Ok(())
}

fn run_evaluate(a: &EvaluateArgs) -> Result<()> {
    let norm = match (a.normalization, &a.eyes) {
        (Normalization::FaceSize, _) => ErrorNormalization::FaceSize,
        (Normalization::InterOcular, Some(e)) => ErrorNormalization::InterOcular(e.0, e.1),
        (Normalization::InterOcular, None) => {
            return Err(Error::InvalidConfig("inter-ocular normalization needs --eyes A,B".into()))
        }
    };
    let manifest = load_manifest(&a.manifest)?;
    let preds = read_predictions(&a.predictions)?;
    if preds.len() != manifest.entries.len() {
        return Err(Error::InvalidInput(format!(
            "{} predictions for {} manifest entries",
            preds.len(),
            manifest.entries.len()
        )));
    }
    let mut errors = Vec::with_capacity(preds.len());
    for (i, (p, e)) in preds.iter().zip(&manifest.entries).enumerate() {
        let gt = e.landmarks.as_ref().ok_or_else(|| Error::ManifestEntry {
            index: i,
            path: e.image.clone(),
            message: "no ground-truth landmarks".into(),
        })?;
        errors.push(normalized_error(p, gt, norm, &shape_to_bbox(gt)?)?);
    }
    let report = ced_and_failure(&errors, a.threshold)?;
    create_dir(&a.out_dir)?;
    atomic_write(&a.out_dir.join("errors.csv"), render_errors(&report).as_bytes())?;
    atomic_write(&a.out_dir.join("ced.csv"), render_ced(&report).as_bytes())?;
    let summary = serde_json::json!({
        "n_samples": errors.len(),
        "mean_error": report.mean_error,
        "failure_threshold": report.failure_threshold,
        "failure_rate": report.failure_rate,
    });
    atomic_write(&a.out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    println!(
        "samples {}  mean error {:.6}  failure rate {:.6} (threshold {})",
        errors.len(),
        report.mean_error,
        report.failure_rate,
        report.failure_threshold
    );
    Ok(())
}

fn run_augment(a: &AugmentArgs) -> Result<()> {
    let (manifest, samples) = load_dataset(&a.manifest)?;
    let out = augment_samples(&samples, &a.augment.options(a.seed), manifest.mirror_map.as_ref())?;
    write_dataset(&a.out, &out, manifest.n_landmarks, manifest.mirror_map.clone())?;
    println!("wrote {} samples to {}", out.len(), a.out.display());
    Ok(())
}

fn run_synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        n_samples: a.n_samples,
        image_size: a.image_size,
        pose_latent_range: (a.pose_min, a.pose_max),
        pose_gap: a.pose_gap,
        max_yaw_degrees: a.max_yaw,
        texture_noise: a.texture_noise,
        box_jitter: a.box_jitter,
        seed: a.seed,
        ..Default::default()
    };
    let ds = generate(&spec)?;
    write_dataset(&a.out, &ds.samples, spec.n_landmarks, Some(ds.mirror_map))?;
    println!("wrote {} samples to {}", ds.samples.len(), a.out.display());
    Ok(())
}

fn run_ced_plot(a: &CedPlotArgs) -> Result<()> {
    let points = read_ced(&a.input)?;
    atomic_write(&a.out, render_ced_svg(&points).as_bytes())?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => run_train(a),
        Command::Detect(a) => run_detect(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Augment(a) => run_augment(a),
        Command::Synth(a) => run_synth(a),
        Command::CedPlot(a) => run_ced_plot(a),
    }
}

/// Parses `argv` (program name first) and runs the command.
///
/// Returns 0 on success, 1 on operational failure and 2 on usage errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

