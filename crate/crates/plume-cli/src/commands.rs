//! The non-generation subcommands: annotation import, evaluation,
//! splitting, trimap batches, and single matte composites.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use plume_core::compose::derive_mask;
use plume_core::matting::{matte_composite, trimap_from_alpha, trimap_from_mask, TrimapThresholds};
use plume_core::metrics::{split_dataset, text_table, EvalReport, MeanIouAccumulator};
use plume_core::png_io::{load_png, png_dims, save_png};
use plume_core::raster::AlphaMatte;
use plume_core::via::{project_to_masks, MaskSummary, ViaProject};
use plume_core::AlphaMatte64;

use crate::pipeline::ManifestRecord;

/// Loads a PNG as a single unit-interval plane (RGB collapses to luma).
fn load_unit_plane(path: &Path) -> Result<AlphaMatte64> {
    let image = load_png::<f64>(path)?;
    Ok(AlphaMatte::from_raster(&image.luminance())?)
}

/// Sorted `*.png` file names in `dir`.
fn png_names(dir: &Path) -> Result<BTreeSet<String>> {
    let mut names = BTreeSet::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let entry = entry?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_ascii_lowercase().ends_with(".png")
            && entry.file_type().map(|t| t.is_file()).unwrap_or(false)
        {
            names.insert(name);
        }
    }
    Ok(names)
}

pub struct EvaluateOptions {
    pub pred_dir: PathBuf,
    pub gt_dir: PathBuf,
    /// Soft predictions count as smoke at or above this byte value.
    pub pred_threshold: u8,
    pub model: String,
    /// Base path for `<base>.json` and `<base>.txt` reports.
    pub report_base: Option<PathBuf>,
}

pub struct EvaluateOutcome {
    pub report: EvalReport,
    pub unmatched_pred: Vec<String>,
    pub unmatched_gt: Vec<String>,
}

/// Pairs prediction and ground-truth masks by file name and scores them.
pub fn evaluate(opts: &EvaluateOptions) -> Result<EvaluateOutcome> {
    if !(1..=254).contains(&opts.pred_threshold) {
        bail!("--pred-threshold must be in 1..=254");
    }
    let preds = png_names(&opts.pred_dir)?;
    let gts = png_names(&opts.gt_dir)?;
    let matched: Vec<&String> = preds.intersection(&gts).collect();
    let unmatched_pred: Vec<String> = preds.difference(&gts).cloned().collect();
    let unmatched_gt: Vec<String> = gts.difference(&preds).cloned().collect();
    if matched.is_empty() {
        bail!(
            "no matching mask file names between {} and {}",
            opts.pred_dir.display(),
            opts.gt_dir.display()
        );
    }

    let tau = opts.pred_threshold as f64 / 255.0;
    let mut acc = MeanIouAccumulator::new();
    for name in &matched {
        let pred_plane = load_unit_plane(&opts.pred_dir.join(name.as_str()))?;
        let gt_plane = load_unit_plane(&opts.gt_dir.join(name.as_str()))?;
        let pred = derive_mask(&pred_plane, tau)?;
        let gt = derive_mask(&gt_plane, 0.5)?;
        acc.add(name.as_str(), &pred, &gt)
            .with_context(|| format!("scoring {name}"))?;
    }
    let report = acc.finish(opts.model.clone())?;

    if let Some(base) = &opts.report_base {
        if let Some(parent) = base.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        let json_path = append_extension(base, "json");
        let text_path = append_extension(base, "txt");
        std::fs::write(&json_path, report.to_json())
            .with_context(|| format!("writing {}", json_path.display()))?;
        std::fs::write(&text_path, text_table([&report]))
            .with_context(|| format!("writing {}", text_path.display()))?;
    }

    Ok(EvaluateOutcome {
        report,
        unmatched_pred,
        unmatched_gt,
    })
}

fn append_extension(base: &Path, ext: &str) -> PathBuf {
    let mut name = OsString::from(base.as_os_str());
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

/// Rasterizes a VIA project into per-image mask PNGs. Image dimensions come
/// from PNG headers in `images_dir`, falling back to dims embedded in the
/// annotation entries.
pub fn import_annotations(
    via_path: &Path,
    images_dir: &Path,
    out_dir: &Path,
) -> Result<MaskSummary> {
    let text = std::fs::read_to_string(via_path)
        .with_context(|| format!("reading {}", via_path.display()))?;
    let project = ViaProject::parse(&text)?;
    let lookup = |name: &str| png_dims(images_dir.join(name)).ok();
    Ok(project_to_masks(&project, lookup, out_dir)?)
}

/// Splits ids from a manifest or a plain id-per-line file into train/eval
/// list files. Returns `(train_len, eval_len)`.
pub fn split(
    input: &Path,
    fraction: f64,
    seed: u64,
    train_out: &Path,
    eval_out: &Path,
) -> Result<(usize, usize)> {
    let text =
        std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let mut ids = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('{') {
            let record: ManifestRecord = serde_json::from_str(line)
                .with_context(|| format!("parsing manifest line in {}", input.display()))?;
            ids.push(record.sample_id);
        } else {
            ids.push(line.to_string());
        }
    }
    let (train, eval) = split_dataset(&ids, fraction, seed)?;
    let lens = (train.len(), eval.len());
    for (path, list) in [(train_out, train), (eval_out, eval)] {
        let mut body = list.join("\n");
        body.push('\n');
        std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(lens)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrimapMode {
    /// Inputs are alpha mattes; threshold into FG/BG/unknown.
    Alpha,
    /// Inputs are binary masks; erode/dilate into a banded trimap.
    Mask,
}

pub struct TrimapsOptions {
    pub input_dir: PathBuf,
    pub out_dir: PathBuf,
    pub mode: TrimapMode,
    pub thresholds: TrimapThresholds,
    pub erode_radius: u32,
}

/// Converts every PNG in `input_dir` into a trimap PNG in `out_dir`.
/// Per-file failures are reported and processing continues.
pub fn trimaps(opts: &TrimapsOptions) -> Result<(usize, Vec<(String, String)>)> {
    opts.thresholds.validate()?;
    std::fs::create_dir_all(&opts.out_dir)
        .with_context(|| format!("creating {}", opts.out_dir.display()))?;
    let names = png_names(&opts.input_dir)?;
    if names.is_empty() {
        bail!("no PNG inputs in {}", opts.input_dir.display());
    }
    let mut written = 0;
    let mut failures = Vec::new();
    for name in names {
        let result = (|| -> Result<()> {
            let plane = load_unit_plane(&opts.input_dir.join(&name))?;
            let trimap = match opts.mode {
                TrimapMode::Alpha => trimap_from_alpha(&plane, &opts.thresholds)?,
                TrimapMode::Mask => {
                    let mask = derive_mask(&plane, 0.5)?;
                    trimap_from_mask(&mask, opts.erode_radius, opts.thresholds.band_radius)
                }
            };
            save_png(&trimap, opts.out_dir.join(&name))?;
            Ok(())
        })();
        match result {
            Ok(()) => written += 1,
            Err(e) => failures.push((name, format!("{e:#}"))),
        }
    }
    Ok((written, failures))
}

/// One matte composite: `out = alpha * foreground + (1 - alpha) * background`.
pub fn composite_once(
    foreground: &Path,
    alpha: &Path,
    background: &Path,
    out: &Path,
) -> Result<()> {
    let fg = load_png::<f64>(foreground)?.to_rgb();
    let bg = load_png::<f64>(background)?.to_rgb();
    let alpha = load_unit_plane(alpha)?;
    let blended = matte_composite(&fg, &alpha, &bg)?;
    save_png(&blended, out)?;
    Ok(())
}
