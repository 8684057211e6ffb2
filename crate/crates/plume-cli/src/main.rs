use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use plume_cli::commands::{self, EvaluateOptions, TrimapMode, TrimapsOptions};
use plume_cli::config::FileConfig;
use plume_cli::pipeline::{generate_dataset, GenerationConfig};
use plume_core::compose::{AugmentationRanges, BackgroundPolarity, DEFAULT_MASK_THRESHOLD};
use plume_core::matting::{
    TrimapThresholds, DEFAULT_BAND_RADIUS, DEFAULT_BG_MAX, DEFAULT_ERODE_RADIUS, DEFAULT_FG_MIN,
};
use plume_core::metrics::text_table;

#[derive(Parser)]
#[command(
    name = "plume",
    version,
    about = "Synthesize, annotate, and evaluate smoke-segmentation datasets"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Composite smoke plumes onto backgrounds into an annotated dataset
    Generate(GenerateArgs),
    /// Rasterize VIA annotation JSON into ground-truth mask PNGs
    ImportAnnotations(ImportArgs),
    /// Score predicted masks against ground truth and report mIoU
    Evaluate(EvaluateArgs),
    /// Split a manifest or id list into train/eval lists
    Split(SplitArgs),
    /// Derive trimaps from alpha mattes or binary masks
    Trimaps(TrimapsArgs),
    /// Blend one foreground over a background through an alpha matte
    Composite(CompositeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolarityArg {
    /// Bright plume on dark frames
    Dark,
    /// Dark plume on white frames
    White,
}

impl From<PolarityArg> for BackgroundPolarity {
    fn from(value: PolarityArg) -> Self {
        match value {
            PolarityArg::Dark => BackgroundPolarity::DarkBackground,
            PolarityArg::White => BackgroundPolarity::WhiteBackground,
        }
    }
}

fn parse_polarity(text: &str) -> Result<BackgroundPolarity> {
    match text {
        "dark" => Ok(BackgroundPolarity::DarkBackground),
        "white" => Ok(BackgroundPolarity::WhiteBackground),
        other => Err(anyhow!("polarity must be 'dark' or 'white', got '{other}'")),
    }
}

fn parse_range(text: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| format!("expected 'min,max', got '{text}'"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad min: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad max: {e}"))?;
    Ok((lo, hi))
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory of smoke source PNGs
    #[arg(long)]
    smoke_dir: Option<PathBuf>,
    /// Directory of background PNGs
    #[arg(long)]
    background_dir: Option<PathBuf>,
    /// Output dataset directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of samples to generate
    #[arg(long)]
    count: Option<u64>,
    /// Master seed; the whole output tree is a function of it
    #[arg(long)]
    seed: Option<u64>,
    /// How the smoke sources encode the plume
    #[arg(long, value_enum)]
    polarity: Option<PolarityArg>,
    /// Alpha threshold for mask derivation
    #[arg(long)]
    mask_threshold: Option<f64>,
    /// Worker threads (0 = auto)
    #[arg(long)]
    workers: Option<usize>,
    /// Plume width as a fraction of background width, 'min,max'
    #[arg(long, value_parser = parse_range)]
    scale_range: Option<(f64, f64)>,
    /// Rotation in degrees, 'min,max' within [-15, 15]
    #[arg(long, value_parser = parse_range)]
    rotation_range: Option<(f64, f64)>,
    /// Per-channel tint multiplier, 'min,max' within [0.8, 1.2]
    #[arg(long, value_parser = parse_range)]
    tint_range: Option<(f64, f64)>,
    /// Plume opacity, 'min,max' within (0, 1]
    #[arg(long, value_parser = parse_range)]
    opacity_range: Option<(f64, f64)>,
    /// JSON config file mirroring these flags (flags win)
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    /// VIA project JSON (v2 wrapper or bare metadata map)
    #[arg(long)]
    via: Option<PathBuf>,
    /// Directory holding the annotated images (PNG headers give mask dims)
    #[arg(long)]
    images_dir: Option<PathBuf>,
    /// Output directory for mask PNGs
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory of predicted masks (soft 8-bit maps allowed)
    #[arg(long)]
    pred_dir: Option<PathBuf>,
    /// Directory of ground-truth masks, paired by file name
    #[arg(long)]
    gt_dir: Option<PathBuf>,
    /// Base path for <base>.json and <base>.txt reports
    #[arg(long)]
    report: Option<PathBuf>,
    /// Byte threshold binarizing soft predictions
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=254))]
    pred_threshold: Option<u8>,
    /// Run name in the report table
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    /// Manifest (JSON lines) or plain id-per-line file
    #[arg(long)]
    input: Option<PathBuf>,
    /// Training fraction; floor(fraction * N) ids go to train
    #[arg(long)]
    fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file for training ids
    #[arg(long)]
    train_out: Option<PathBuf>,
    /// Output file for evaluation ids
    #[arg(long)]
    eval_out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TrimapModeArg {
    /// Inputs are alpha mattes
    Alpha,
    /// Inputs are binary masks
    Mask,
}

#[derive(Args)]
struct TrimapsArgs {
    /// Directory of alpha or mask PNGs
    #[arg(long)]
    input_dir: Option<PathBuf>,
    /// Input interpretation
    #[arg(long, value_enum)]
    mode: Option<TrimapModeArg>,
    /// Output directory for {0,128,255} trimap PNGs
    #[arg(long)]
    out: Option<PathBuf>,
    /// Alpha at or above this is definite foreground (alpha mode)
    #[arg(long)]
    fg_threshold: Option<f64>,
    /// Alpha at or below this is definite background (alpha mode)
    #[arg(long)]
    bg_threshold: Option<f64>,
    /// Unknown-band dilation radius in pixels
    #[arg(long)]
    band_radius: Option<u32>,
    /// Foreground erosion radius in pixels (mask mode)
    #[arg(long)]
    erode_radius: Option<u32>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompositeArgs {
    #[arg(long)]
    foreground: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<PathBuf>,
    #[arg(long)]
    background: Option<PathBuf>,
    /// Output PNG path
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    flag.or(file)
        .ok_or_else(|| anyhow!("missing required option --{name} (set it or put '{name}' in the config file)"))
}

fn run_generate(args: GenerateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let defaults = AugmentationRanges::default();
    let polarity = match args.polarity {
        Some(p) => p.into(),
        None => match &file.polarity {
            Some(text) => parse_polarity(text)?,
            None => BackgroundPolarity::WhiteBackground,
        },
    };
    let config = GenerationConfig {
        smoke_dir: require(args.smoke_dir, file.smoke_dir, "smoke-dir")?,
        background_dir: require(args.background_dir, file.background_dir, "background-dir")?,
        out_dir: require(args.out, file.out, "out")?,
        count: require(args.count, file.count, "count")?,
        master_seed: args.seed.or(file.seed).unwrap_or(0),
        polarity,
        mask_threshold: args
            .mask_threshold
            .or(file.mask_threshold)
            .unwrap_or(DEFAULT_MASK_THRESHOLD),
        ranges: AugmentationRanges {
            scale_fraction: args
                .scale_range
                .or(file.scale_range)
                .unwrap_or(defaults.scale_fraction),
            rotation_degrees: args
                .rotation_range
                .or(file.rotation_range)
                .unwrap_or(defaults.rotation_degrees),
            tint: args.tint_range.or(file.tint_range).unwrap_or(defaults.tint),
            opacity: args
                .opacity_range
                .or(file.opacity_range)
                .unwrap_or(defaults.opacity),
        },
        workers: args.workers.or(file.workers).unwrap_or(0),
    };
    let summary = generate_dataset(&config)?;
    println!(
        "generated {} of {} samples into {} in {:.2}s ({} reseeds)",
        summary.written,
        summary.requested,
        config.out_dir.display(),
        summary.elapsed.as_secs_f64(),
        summary.reseeds,
    );
    println!("manifest: {}", summary.manifest_path.display());
    for (sample_id, reason) in &summary.skipped {
        println!("skipped {sample_id}: {reason}");
    }
    Ok(())
}

fn run_import(args: ImportArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let via = require(args.via, file.via, "via")?;
    let images_dir = require(args.images_dir, file.images_dir, "images-dir")?;
    let out = require(args.out, file.out, "out")?;
    let summary = commands::import_annotations(&via, &images_dir, &out)?;
    println!(
        "{} masks written, {} empty, {} shapes skipped",
        summary.masks_written, summary.empty_masks, summary.skipped_shapes
    );
    for (name, reason) in &summary.failures {
        println!("failed {name}: {reason}");
    }
    Ok(())
}

fn run_evaluate(args: EvaluateArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let opts = EvaluateOptions {
        pred_dir: require(args.pred_dir, file.pred_dir, "pred-dir")?,
        gt_dir: require(args.gt_dir, file.gt_dir, "gt-dir")?,
        pred_threshold: args.pred_threshold.or(file.pred_threshold).unwrap_or(128),
        model: args.name.or(file.name).unwrap_or_else(|| "run".to_string()),
        report_base: args.report.or(file.report),
    };
    let outcome = commands::evaluate(&opts)?;
    print!("{}", text_table([&outcome.report]));
    for name in &outcome.unmatched_pred {
        println!("unmatched prediction: {name}");
    }
    for name in &outcome.unmatched_gt {
        println!("unmatched ground truth: {name}");
    }
    Ok(())
}

fn run_split(args: SplitArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let input = require(args.input, file.input, "input")?;
    let fraction = args.fraction.or(file.fraction).unwrap_or(0.8);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let train_out = require(args.train_out, file.train_out, "train-out")?;
    let eval_out = require(args.eval_out, file.eval_out, "eval-out")?;
    let (train, eval) = commands::split(&input, fraction, seed, &train_out, &eval_out)?;
    println!("{train} train / {eval} eval");
    Ok(())
}

fn run_trimaps(args: TrimapsArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let mode = match args.mode {
        Some(TrimapModeArg::Alpha) => TrimapMode::Alpha,
        Some(TrimapModeArg::Mask) => TrimapMode::Mask,
        None => match file.mode.as_deref() {
            Some("alpha") => TrimapMode::Alpha,
            Some("mask") => TrimapMode::Mask,
            Some(other) => return Err(anyhow!("mode must be 'alpha' or 'mask', got '{other}'")),
            None => TrimapMode::Alpha,
        },
    };
    let opts = TrimapsOptions {
        input_dir: require(args.input_dir, file.input_dir, "input-dir")?,
        out_dir: require(args.out, file.out, "out")?,
        mode,
        thresholds: TrimapThresholds {
            fg_min: args.fg_threshold.or(file.fg_threshold).unwrap_or(DEFAULT_FG_MIN),
            bg_max: args.bg_threshold.or(file.bg_threshold).unwrap_or(DEFAULT_BG_MAX),
            band_radius: args
                .band_radius
                .or(file.band_radius)
                .unwrap_or(DEFAULT_BAND_RADIUS),
        },
        erode_radius: args
            .erode_radius
            .or(file.erode_radius)
            .unwrap_or(DEFAULT_ERODE_RADIUS),
    };
    let (written, failures) = commands::trimaps(&opts)?;
    println!("{written} trimaps written");
    for (name, reason) in &failures {
        println!("failed {name}: {reason}");
    }
    Ok(())
}

fn run_composite(args: CompositeArgs) -> Result<()> {
    let file = FileConfig::load(args.config.as_deref())?;
    let foreground = require(args.foreground, file.foreground, "foreground")?;
    let alpha = require(args.alpha, file.alpha, "alpha")?;
    let background = require(args.background, file.background, "background")?;
    let out = require(args.out, file.out, "out")?;
    commands::composite_once(&foreground, &alpha, &background, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(args) => run_generate(args),
        Command::ImportAnnotations(args) => run_import(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Split(args) => run_split(args),
        Command::Trimaps(args) => run_trimaps(args),
        Command::Composite(args) => run_composite(args),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        // One machine-readable error line on stderr.
        eprintln!(
            "{}",
            serde_json::json!({ "error": format!("{e:#}") })
        );
        std::process::exit(1);
    }
}
