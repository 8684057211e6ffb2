//! Optional JSON config file mirroring the command-line flags. Explicit
//! flags override file values; one file can serve every subcommand since
//! each reads only the fields it knows.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default)]
pub struct FileConfig {
    // generate
    pub smoke_dir: Option<PathBuf>,
    pub background_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub count: Option<u64>,
    pub seed: Option<u64>,
    pub polarity: Option<String>,
    pub mask_threshold: Option<f64>,
    pub workers: Option<usize>,
    pub scale_range: Option<(f64, f64)>,
    pub rotation_range: Option<(f64, f64)>,
    pub tint_range: Option<(f64, f64)>,
    pub opacity_range: Option<(f64, f64)>,
    // import-annotations
    pub via: Option<PathBuf>,
    pub images_dir: Option<PathBuf>,
    // evaluate
    pub pred_dir: Option<PathBuf>,
    pub gt_dir: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub pred_threshold: Option<u8>,
    pub name: Option<String>,
    // split
    pub input: Option<PathBuf>,
    pub fraction: Option<f64>,
    pub train_out: Option<PathBuf>,
    pub eval_out: Option<PathBuf>,
    // trimaps
    pub input_dir: Option<PathBuf>,
    pub mode: Option<String>,
    pub fg_threshold: Option<f64>,
    pub bg_threshold: Option<f64>,
    pub band_radius: Option<u32>,
    pub erode_radius: Option<u32>,
    // composite
    pub foreground: Option<PathBuf>,
    pub alpha: Option<PathBuf>,
    pub background: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))
            }
        }
    }
}
