//! Trimap generation and matte-based compositing.
//!
//! A trimap partitions every pixel into definite foreground, definite
//! background, or an unknown band around the plume fringe; the band is what
//! a matting model refines into a full alpha matte. Both directions are
//! covered here: deriving trimaps from ground-truth alphas (synthetic
//! white-background plumes make this automatic) and from annotation masks.

use serde::{Deserialize, Serialize};

use crate::compose::blend;
use crate::error::{Error, Result};
use crate::morphology::{dilate, erode};
use crate::raster::{AlphaMatte, BinaryMask, RasterImage, Trimap, TrimapLabel};
use crate::scalar::Scalar;

pub const DEFAULT_FG_MIN: f64 = 0.95;
pub const DEFAULT_BG_MAX: f64 = 0.05;
pub const DEFAULT_BAND_RADIUS: u32 = 5;
pub const DEFAULT_ERODE_RADIUS: u32 = 3;

/// Thresholds for [`trimap_from_alpha`]: alpha at or above `fg_min` is
/// definite foreground, at or below `bg_max` definite background, and the
/// unknown band in between is widened by `band_radius` pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrimapThresholds {
    pub fg_min: f64,
    pub bg_max: f64,
    pub band_radius: u32,
}

impl Default for TrimapThresholds {
    fn default() -> Self {
        Self {
            fg_min: DEFAULT_FG_MIN,
            bg_max: DEFAULT_BG_MAX,
            band_radius: DEFAULT_BAND_RADIUS,
        }
    }
}

impl TrimapThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.fg_min > 0.0 && self.fg_min < 1.0) || !(self.bg_max > 0.0 && self.bg_max < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "trimap thresholds must lie in (0, 1), got fg_min={} bg_max={}",
                self.fg_min, self.bg_max
            )));
        }
        if self.bg_max >= self.fg_min {
            return Err(Error::InvalidArgument(format!(
                "bg_max ({}) must be below fg_min ({})",
                self.bg_max, self.fg_min
            )));
        }
        Ok(())
    }
}

/// Thresholds an alpha matte into a trimap and dilates the unknown band.
///
/// Dilation uses a square structuring element and converts overwritten
/// foreground/background pixels to unknown, so the band only ever grows.
pub fn trimap_from_alpha<S: Scalar>(
    alpha: &AlphaMatte<S>,
    thresholds: &TrimapThresholds,
) -> Result<Trimap> {
    thresholds.validate()?;
    let fg_min = S::from_f64_lossy(thresholds.fg_min);
    let bg_max = S::from_f64_lossy(thresholds.bg_max);
    let (w, h) = alpha.dims();
    let base = Trimap::from_fn(w, h, |x, y| {
        let a = alpha.get(x, y);
        if a >= fg_min {
            TrimapLabel::Foreground
        } else if a <= bg_max {
            TrimapLabel::Background
        } else {
            TrimapLabel::Unknown
        }
    });
    if thresholds.band_radius == 0 {
        return Ok(base);
    }
    let unknown = BinaryMask::from_fn(w, h, |x, y| base.get(x, y) == TrimapLabel::Unknown);
    if unknown.count_ones() == 0 {
        return Ok(base);
    }
    let widened = dilate(&unknown, thresholds.band_radius);
    Ok(Trimap::from_fn(w, h, |x, y| {
        if widened.get(x, y) {
            TrimapLabel::Unknown
        } else {
            base.get(x, y)
        }
    }))
}

/// Builds a trimap from a binary annotation mask: the eroded mask is
/// definite foreground, everything beyond the dilated mask is definite
/// background, and the ring between them is unknown.
///
/// Radii large enough to erase all foreground are legal; a warning is
/// logged since the result is usually unintended.
pub fn trimap_from_mask(mask: &BinaryMask, erode_radius: u32, band_radius: u32) -> Trimap {
    let fg = erode(mask, erode_radius);
    let reach = dilate(mask, band_radius);
    if mask.count_ones() > 0 && fg.count_ones() == 0 {
        log::warn!(
            "erode radius {erode_radius} removed all {} foreground pixels",
            mask.count_ones()
        );
    }
    Trimap::from_fn(mask.width(), mask.height(), |x, y| {
        if fg.get(x, y) {
            TrimapLabel::Foreground
        } else if reach.get(x, y) {
            TrimapLabel::Unknown
        } else {
            TrimapLabel::Background
        }
    })
}

/// Full-frame alpha blend: `out = alpha * foreground + (1 - alpha) * background`.
pub fn matte_composite<S: Scalar>(
    foreground: &RasterImage<S>,
    alpha: &AlphaMatte<S>,
    background: &RasterImage<S>,
) -> Result<RasterImage<S>> {
    if foreground.channels() != 3 || background.channels() != 3 {
        return Err(Error::InvalidArgument(
            "matte compositing requires 3-channel images".to_string(),
        ));
    }
    if foreground.dims() != background.dims() {
        return Err(Error::dims(
            "matte foreground vs background",
            foreground.dims(),
            background.dims(),
        ));
    }
    if foreground.dims() != alpha.dims() {
        return Err(Error::dims(
            "matte foreground vs alpha",
            foreground.dims(),
            alpha.dims(),
        ));
    }
    let (w, h) = foreground.dims();
    Ok(RasterImage::from_fn(w, h, 3, |x, y, c| {
        blend(alpha.get(x, y), foreground.get(x, y, c), background.get(x, y, c))
    }))
}

/// Consistency report between a trimap and a binary mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrimapValidation {
    /// Foreground pixels whose mask value is 0.
    pub fg_violations: u64,
    /// Background pixels whose mask value is 1.
    pub bg_violations: u64,
    /// Pixel counts as `[background, unknown, foreground]`.
    pub label_counts: [u64; 3],
}

impl TrimapValidation {
    pub fn passed(&self) -> bool {
        self.fg_violations == 0 && self.bg_violations == 0
    }
}

/// Checks that every definite trimap label agrees with the mask.
pub fn validate_trimap(trimap: &Trimap, mask: &BinaryMask) -> Result<TrimapValidation> {
    if trimap.dims() != mask.dims() {
        return Err(Error::dims("trimap vs mask", trimap.dims(), mask.dims()));
    }
    let mut fg_violations = 0;
    let mut bg_violations = 0;
    for y in 0..trimap.height() {
        for x in 0..trimap.width() {
            match trimap.get(x, y) {
                TrimapLabel::Foreground if !mask.get(x, y) => fg_violations += 1,
                TrimapLabel::Background if mask.get(x, y) => bg_violations += 1,
                _ => {}
            }
        }
    }
    Ok(TrimapValidation {
        fg_violations,
        bg_violations,
        label_counts: trimap.label_counts(),
    })
}
