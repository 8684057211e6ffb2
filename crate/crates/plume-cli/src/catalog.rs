//! Asset ingestion: deterministic catalogs of decodable PNGs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plume_core::png_io::load_png;
use plume_core::RasterImage64;

/// One decoded source image with a stable id (its file name).
pub struct Asset {
    pub id: String,
    pub path: PathBuf,
    pub image: RasterImage64,
}

/// Assets in lexicographic file-name order, plus per-file decode failures.
pub struct AssetCatalog {
    pub assets: Vec<Asset>,
    pub failures: Vec<(PathBuf, String)>,
}

impl AssetCatalog {
    /// Enumerates `*.png` files in `dir` (non-recursive, sorted by file
    /// name), decoding each. Unreadable files are reported, not fatal;
    /// an empty catalog is an error.
    pub fn ingest(dir: &Path) -> Result<Self> {
        let entries =
            std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?;
        let mut names: Vec<String> = Vec::new();
        for entry in entries {
            let entry = entry.with_context(|| format!("listing {}", dir.display()))?;
            if !entry.file_type().map(|t| t.is_file()).unwrap_or(false) {
                continue;
            }
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.to_ascii_lowercase().ends_with(".png") {
                names.push(name);
            }
        }
        names.sort();

        let mut assets = Vec::new();
        let mut failures = Vec::new();
        for name in names {
            let path = dir.join(&name);
            match load_png::<f64>(&path) {
                Ok(image) => assets.push(Asset {
                    id: name,
                    path,
                    image,
                }),
                Err(e) => {
                    log::warn!("skipping asset {}: {e}", path.display());
                    failures.push((path, e.to_string()));
                }
            }
        }
        if assets.is_empty() {
            bail!("no usable PNG assets in {}", dir.display());
        }
        Ok(Self { assets, failures })
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn get(&self, index: usize) -> &Asset {
        &self.assets[index]
    }
}

/// Ingests the smoke and background catalogs for a generation run.
pub fn ingest_assets(smoke_dir: &Path, background_dir: &Path) -> Result<(AssetCatalog, AssetCatalog)> {
    let smoke = AssetCatalog::ingest(smoke_dir).context("smoke catalog")?;
    let background = AssetCatalog::ingest(background_dir).context("background catalog")?;
    Ok((smoke, background))
}
