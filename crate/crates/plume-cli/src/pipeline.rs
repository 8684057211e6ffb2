//! Parallel deterministic dataset generation.
//!
//! Every sample is driven by a seed derived from `(master_seed, index)`, so
//! the output tree is a pure function of the configuration: re-running, or
//! changing the worker count, produces byte-identical files. The manifest
//! is one JSON record per line, written in index order.

use std::io::Write;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use plume_core::compose::{
    derive_mask, derive_sample_seed, generate_sample, sample_params_with, splitmix64,
    AugmentationParams, AugmentationRanges, BackgroundPolarity, SampleRecipe,
};
use plume_core::png_io::save_png;
use plume_core::Error as CoreError;

use crate::catalog::{ingest_assets, AssetCatalog};

/// Stream tag separating asset picks from parameter draws.
const ASSET_STREAM_TAG: u64 = 0x706c_756d_65a5_5e75;
/// Stream tag for reseeding after an infeasible placement.
const RESEED_TAG: u64 = 0x706c_756d_655e_ed00;
/// Reseed attempts before a sample index is skipped.
const MAX_RESEEDS: u64 = 4;

/// One line of the dataset manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: String,
    pub image_path: String,
    pub mask_path: String,
    pub alpha_path: String,
    pub smoke_source: String,
    pub background_source: String,
    pub seed: u64,
    pub params: AugmentationParams,
    pub polarity: BackgroundPolarity,
}

#[derive(Clone, Debug)]
pub struct GenerationConfig {
    pub smoke_dir: PathBuf,
    pub background_dir: PathBuf,
    pub out_dir: PathBuf,
    pub count: u64,
    pub master_seed: u64,
    pub polarity: BackgroundPolarity,
    pub mask_threshold: f64,
    pub ranges: AugmentationRanges,
    /// Worker threads; 0 picks the rayon default.
    pub workers: usize,
}

#[derive(Debug)]
pub struct GenerationSummary {
    pub requested: u64,
    pub written: usize,
    /// `(sample_id, reason)` for indices with no feasible placement.
    pub skipped: Vec<(String, String)>,
    pub reseeds: u64,
    pub manifest_path: PathBuf,
    pub elapsed: Duration,
}

enum Outcome {
    Written { record: ManifestRecord, reseeds: u64 },
    Skipped { sample_id: String, reason: String },
}

/// Generates `config.count` samples and writes images, masks, alphas, and
/// the manifest under `config.out_dir`.
pub fn generate_dataset(config: &GenerationConfig) -> Result<GenerationSummary> {
    let started = Instant::now();
    if config.count == 0 {
        bail!("count must be at least 1");
    }
    config
        .ranges
        .validate()
        .context("augmentation ranges")?;
    let (smoke, background) = ingest_assets(&config.smoke_dir, &config.background_dir)?;
    for (path, reason) in smoke.failures.iter().chain(&background.failures) {
        eprintln!("unreadable asset {}: {reason}", path.display());
    }

    let images_dir = config.out_dir.join("images");
    let masks_dir = config.out_dir.join("masks");
    let alphas_dir = config.out_dir.join("alphas");
    for dir in [&images_dir, &masks_dir, &alphas_dir] {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }

    let build = |index: u64| build_sample(config, &smoke, &background, index);
    let outcomes: Vec<Result<Outcome>> = if config.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .context("building worker pool")?
            .install(|| (0..config.count).into_par_iter().map(build).collect())
    } else {
        (0..config.count).into_par_iter().map(build).collect()
    };

    let manifest_path = config.out_dir.join("manifest.jsonl");
    let file = std::fs::File::create(&manifest_path)
        .with_context(|| format!("creating {}", manifest_path.display()))?;
    let mut manifest = std::io::BufWriter::new(file);
    let mut summary = GenerationSummary {
        requested: config.count,
        written: 0,
        skipped: Vec::new(),
        reseeds: 0,
        manifest_path: manifest_path.clone(),
        elapsed: Duration::ZERO,
    };
    for outcome in outcomes {
        match outcome {
            Ok(Outcome::Written { record, reseeds }) => {
                let line = serde_json::to_string(&record).context("encoding manifest record")?;
                writeln!(manifest, "{line}").context("writing manifest")?;
                summary.written += 1;
                summary.reseeds += reseeds;
            }
            Ok(Outcome::Skipped { sample_id, reason }) => {
                summary.skipped.push((sample_id, reason));
            }
            Err(e) => {
                manifest.flush().ok();
                return Err(e.context(format!(
                    "aborting generation; manifest at {} is partial ({} records)",
                    manifest_path.display(),
                    summary.written
                )));
            }
        }
    }
    manifest.flush().context("flushing manifest")?;
    summary.elapsed = started.elapsed();
    Ok(summary)
}

fn build_sample(
    config: &GenerationConfig,
    smoke: &AssetCatalog,
    background: &AssetCatalog,
    index: u64,
) -> Result<Outcome> {
    let sample_id = format!("sample_{index:06}");

    let pick_seed = derive_sample_seed(config.master_seed ^ ASSET_STREAM_TAG, index);
    let smoke_asset = smoke.get((splitmix64(pick_seed) % smoke.len() as u64) as usize);
    let background_asset =
        background.get((splitmix64(splitmix64(pick_seed)) % background.len() as u64) as usize);

    let mut reseeds = 0u64;
    let (params, seed) = loop {
        let master = if reseeds == 0 {
            config.master_seed
        } else {
            splitmix64(config.master_seed ^ RESEED_TAG.wrapping_add(reseeds))
        };
        match sample_params_with(
            master,
            index,
            background_asset.image.dims(),
            smoke_asset.image.dims(),
            &config.ranges,
        ) {
            Ok(params) => break (params, derive_sample_seed(master, index)),
            Err(CoreError::NoFeasiblePlacement { .. }) if reseeds < MAX_RESEEDS => {
                reseeds += 1;
            }
            Err(CoreError::NoFeasiblePlacement { attempts }) => {
                return Ok(Outcome::Skipped {
                    sample_id,
                    reason: format!(
                        "no feasible placement for {} on {} after {attempts} draws and {reseeds} reseeds",
                        smoke_asset.id, background_asset.id
                    ),
                });
            }
            Err(e) => return Err(e).context("drawing augmentation parameters"),
        }
    };

    let recipe = SampleRecipe {
        smoke_source: smoke_asset.id.clone(),
        background_source: background_asset.id.clone(),
        polarity: config.polarity,
        params,
        seed,
    };
    let sample = generate_sample(
        &recipe,
        &smoke_asset.image,
        &background_asset.image,
        config.mask_threshold,
    )
    .with_context(|| format!("generating {sample_id}"))?;

    // Snap the alpha onto the 8-bit storage lattice before deriving the
    // stored mask, so mask and alpha stay consistent after the PNG trip.
    let alpha = sample.alpha.quantized();
    let mask = derive_mask(&alpha, config.mask_threshold).context("deriving stored mask")?;

    let image_path = format!("images/{sample_id}.png");
    let mask_path = format!("masks/{sample_id}.png");
    let alpha_path = format!("alphas/{sample_id}.png");
    save_png(&sample.image, config.out_dir.join(&image_path))
        .with_context(|| format!("writing {image_path}"))?;
    save_png(&mask, config.out_dir.join(&mask_path))
        .with_context(|| format!("writing {mask_path}"))?;
    save_png(&alpha, config.out_dir.join(&alpha_path))
        .with_context(|| format!("writing {alpha_path}"))?;

    Ok(Outcome::Written {
        record: ManifestRecord {
            sample_id,
            image_path,
            mask_path,
            alpha_path,
            smoke_source: recipe.smoke_source,
            background_source: recipe.background_source,
            seed,
            params,
            polarity: config.polarity,
        },
        reseeds,
    })
}
