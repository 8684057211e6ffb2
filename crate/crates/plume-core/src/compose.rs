//! Intensity-derived alpha, seeded augmentation, and plume-over-background
//! compositing.
//!
//! A generated sample is a pure function of its [`SampleRecipe`]: the recipe
//! stores the per-sample seed and the fully resolved [`AugmentationParams`],
//! so any sample can be regenerated bit-exactly, in any order, on any number
//! of threads.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{AlphaMatte, BinaryMask, RasterImage};
use crate::scalar::Scalar;

/// Default alpha threshold separating smoke from background in derived masks.
pub const DEFAULT_MASK_THRESHOLD: f64 = 0.1;

/// Initial scale draw plus up to this many redraws when the transformed
/// plume does not fit the background.
pub const MAX_SCALE_RETRIES: u32 = 16;

/// How a smoke source frame encodes the plume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackgroundPolarity {
    /// Bright plume on a dark background: alpha = luma.
    #[serde(rename = "dark")]
    DarkBackground,
    /// Dark plume shot against white: alpha = 1 - luma.
    #[serde(rename = "white")]
    WhiteBackground,
}

/// Fully resolved per-sample transform description.
///
/// `scale` is the resize factor applied to the plume frame (never an
/// upscale), `anchor` the top-left placement of the transformed plume in
/// background pixel coordinates. Values are plain `f64` so recipes
/// serialize identically regardless of the pixel scalar in use.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub scale: f64,
    pub flip_horizontal: bool,
    pub rotation_degrees: f64,
    pub tint: [f64; 3],
    pub opacity: f64,
    pub anchor: (u32, u32),
}

impl AugmentationParams {
    /// The do-nothing transform, placed at `anchor`.
    pub fn identity(anchor: (u32, u32)) -> Self {
        Self {
            scale: 1.0,
            flip_horizontal: false,
            rotation_degrees: 0.0,
            tint: [1.0; 3],
            opacity: 1.0,
            anchor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "scale must be in (0, 1], got {}",
                self.scale
            )));
        }
        if !(-15.0..=15.0).contains(&self.rotation_degrees) {
            return Err(Error::InvalidArgument(format!(
                "rotation must be in [-15, 15] degrees, got {}",
                self.rotation_degrees
            )));
        }
        for t in self.tint {
            if !(0.8..=1.2).contains(&t) {
                return Err(Error::InvalidArgument(format!(
                    "tint component must be in [0.8, 1.2], got {t}"
                )));
            }
        }
        if !(self.opacity > 0.0 && self.opacity <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "opacity must be in (0, 1], got {}",
                self.opacity
            )));
        }
        Ok(())
    }
}

/// Draw ranges used by [`sample_params_with`]. Overrides may only narrow
/// the bounds enforced by [`AugmentationParams::validate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationRanges {
    /// Target plume width as a fraction of the background width.
    pub scale_fraction: (f64, f64),
    pub rotation_degrees: (f64, f64),
    pub tint: (f64, f64),
    pub opacity: (f64, f64),
}

impl Default for AugmentationRanges {
    fn default() -> Self {
        Self {
            scale_fraction: (0.1, 0.6),
            rotation_degrees: (-15.0, 15.0),
            tint: (0.8, 1.2),
            opacity: (0.3, 1.0),
        }
    }
}

impl AugmentationRanges {
    pub fn validate(&self) -> Result<()> {
        let ordered = |r: (f64, f64)| r.0 <= r.1;
        if !ordered(self.scale_fraction)
            || !ordered(self.rotation_degrees)
            || !ordered(self.tint)
            || !ordered(self.opacity)
        {
            return Err(Error::InvalidArgument(
                "augmentation range has min > max".to_string(),
            ));
        }
        if !(self.scale_fraction.0 > 0.0 && self.scale_fraction.1 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "scale fraction range must lie in (0, 1], got {:?}",
                self.scale_fraction
            )));
        }
        if self.rotation_degrees.0 < -15.0 || self.rotation_degrees.1 > 15.0 {
            return Err(Error::InvalidArgument(format!(
                "rotation range must lie in [-15, 15], got {:?}",
                self.rotation_degrees
            )));
        }
        if self.tint.0 < 0.8 || self.tint.1 > 1.2 {
            return Err(Error::InvalidArgument(format!(
                "tint range must lie in [0.8, 1.2], got {:?}",
                self.tint
            )));
        }
        if !(self.opacity.0 > 0.0 && self.opacity.1 <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "opacity range must lie in (0, 1], got {:?}",
                self.opacity
            )));
        }
        Ok(())
    }
}

/// Everything needed to regenerate one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecipe {
    pub smoke_source: String,
    pub background_source: String,
    pub polarity: BackgroundPolarity,
    pub params: AugmentationParams,
    pub seed: u64,
}

/// One generated training triple, all in background coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S: Scalar> {
    pub image: RasterImage<S>,
    pub mask: BinaryMask,
    pub alpha: AlphaMatte<S>,
}

/// splitmix64 mixing step; the fixed hash behind all seed derivation.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Per-sample seed for `(master_seed, index)`.
///
/// The mapping is part of the reproducibility contract: manifests record
/// the derived seed and parallel generation relies on per-index streams.
pub fn derive_sample_seed(master_seed: u64, index: u64) -> u64 {
    splitmix64(master_seed ^ splitmix64(index.wrapping_add(0x9E3779B97F4A7C15)))
}

/// Deterministic uniform draws on top of ChaCha8. The raw bit mappings are
/// fixed here so drawn values never depend on library internals.
struct Draws {
    rng: ChaCha8Rng,
}

impl Draws {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform in [0, 1) from the top 53 bits of one u64.
    fn unit(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    fn range(&mut self, (lo, hi): (f64, f64)) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    fn flag(&mut self) -> bool {
        self.rng.next_u64() & 1 == 1
    }

    fn below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        self.rng.next_u64() % n
    }
}

/// Derives per-pixel opacity from frame intensity.
pub fn intensity_alpha<S: Scalar>(
    smoke: &RasterImage<S>,
    polarity: BackgroundPolarity,
) -> AlphaMatte<S> {
    let lum = smoke.luminance();
    AlphaMatte::from_fn(lum.width(), lum.height(), |x, y| match polarity {
        BackgroundPolarity::DarkBackground => lum.get(x, y, 0),
        BackgroundPolarity::WhiteBackground => S::one() - lum.get(x, y, 0),
    })
}

fn scaled_dims(w: u32, h: u32, scale: f64) -> Result<(u32, u32)> {
    let sw = (scale * w as f64).round();
    let sh = (scale * h as f64).round();
    if sw < 1.0 || sh < 1.0 {
        return Err(Error::InvalidArgument(format!(
            "degenerate output size: {w}x{h} at scale {scale} drops below 1 pixel"
        )));
    }
    Ok((sw as u32, sh as u32))
}

fn rotated_canvas(w: u32, h: u32, rotation_degrees: f64) -> (u32, u32) {
    let theta = rotation_degrees.to_radians();
    let (c, s) = (theta.cos().abs(), theta.sin().abs());
    let tw = (w as f64 * c + h as f64 * s).ceil() as u32;
    let th = (w as f64 * s + h as f64 * c).ceil() as u32;
    (tw, th)
}

/// Bounding box of the plume after scaling and rotation; the footprint the
/// anchor must keep inside the background.
pub fn transformed_dims(dims: (u32, u32), scale: f64, rotation_degrees: f64) -> Result<(u32, u32)> {
    let (sw, sh) = scaled_dims(dims.0, dims.1, scale)?;
    Ok(rotated_canvas(sw, sh, rotation_degrees))
}

#[inline]
fn tap_clamped<S: Scalar>(w: u32, h: u32, ch: usize, data: &[S], x: i64, y: i64, c: usize) -> S {
    let xi = x.clamp(0, w as i64 - 1) as usize;
    let yi = y.clamp(0, h as i64 - 1) as usize;
    data[(yi * w as usize + xi) * ch + c]
}

#[inline]
fn tap_zero<S: Scalar>(w: u32, h: u32, ch: usize, data: &[S], x: i64, y: i64, c: usize) -> S {
    if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
        S::zero()
    } else {
        data[(y as usize * w as usize + x as usize) * ch + c]
    }
}

#[inline]
fn bilinear<S: Scalar>(
    sx: S,
    sy: S,
    mut tap: impl FnMut(i64, i64) -> S,
) -> S {
    let x0 = sx.floor();
    let y0 = sy.floor();
    let fx = sx - x0;
    let fy = sy - y0;
    let xi = x0.to_f64_lossy() as i64;
    let yi = y0.to_f64_lossy() as i64;
    let one = S::one();
    let t00 = tap(xi, yi);
    let t10 = tap(xi + 1, yi);
    let t01 = tap(xi, yi + 1);
    let t11 = tap(xi + 1, yi + 1);
    (one - fx) * (one - fy) * t00 + fx * (one - fy) * t10 + (one - fx) * fy * t01 + fx * fy * t11
}

/// Center-aligned bilinear resize with edge-clamped taps.
fn resize_plane<S: Scalar>(
    w: u32,
    h: u32,
    ch: usize,
    data: &[S],
    ow: u32,
    oh: u32,
) -> Vec<S> {
    let half = S::from_f64_lossy(0.5);
    let rx = S::from_f64_lossy(w as f64) / S::from_f64_lossy(ow as f64);
    let ry = S::from_f64_lossy(h as f64) / S::from_f64_lossy(oh as f64);
    let mut out = Vec::with_capacity(ow as usize * oh as usize * ch);
    for j in 0..oh {
        let sy = (S::from_f64_lossy(j as f64) + half) * ry - half;
        for i in 0..ow {
            let sx = (S::from_f64_lossy(i as f64) + half) * rx - half;
            for c in 0..ch {
                let v = bilinear(sx, sy, |x, y| tap_clamped(w, h, ch, data, x, y, c));
                out.push(v.clamp_unit());
            }
        }
    }
    out
}

/// Rotation about the image center onto an `ow x oh` canvas; samples that
/// fall outside the source take value 0.
fn rotate_plane<S: Scalar>(
    w: u32,
    h: u32,
    ch: usize,
    data: &[S],
    rotation_degrees: f64,
    ow: u32,
    oh: u32,
) -> Vec<S> {
    let theta = rotation_degrees.to_radians();
    let cos_t = S::from_f64_lossy(theta.cos());
    let sin_t = S::from_f64_lossy(theta.sin());
    let cx_in = S::from_f64_lossy((w - 1) as f64 / 2.0);
    let cy_in = S::from_f64_lossy((h - 1) as f64 / 2.0);
    let cx_out = S::from_f64_lossy((ow - 1) as f64 / 2.0);
    let cy_out = S::from_f64_lossy((oh - 1) as f64 / 2.0);
    let mut out = Vec::with_capacity(ow as usize * oh as usize * ch);
    for j in 0..oh {
        let dy = S::from_f64_lossy(j as f64) - cy_out;
        for i in 0..ow {
            let dx = S::from_f64_lossy(i as f64) - cx_out;
            let sx = cos_t * dx + sin_t * dy + cx_in;
            let sy = -sin_t * dx + cos_t * dy + cy_in;
            for c in 0..ch {
                let v = bilinear(sx, sy, |x, y| tap_zero(w, h, ch, data, x, y, c));
                out.push(v.clamp_unit());
            }
        }
    }
    out
}

fn flip_plane<S: Scalar>(w: u32, h: u32, ch: usize, data: &[S]) -> Vec<S> {
    let mut out = Vec::with_capacity(data.len());
    for j in 0..h as usize {
        for i in 0..w as usize {
            let src = (j * w as usize + (w as usize - 1 - i)) * ch;
            out.extend_from_slice(&data[src..src + ch]);
        }
    }
    out
}

/// Applies the recipe transforms to a plume frame and its alpha.
///
/// Image and alpha undergo identical geometric transforms (scale, optional
/// horizontal flip, rotation); tint multiplies the color channels of a
/// 3-channel image and opacity scales the alpha. A single-channel image has
/// no color channels, so tint is skipped for it.
pub fn augment<S: Scalar>(
    smoke: &RasterImage<S>,
    alpha: &AlphaMatte<S>,
    params: &AugmentationParams,
) -> Result<(RasterImage<S>, AlphaMatte<S>)> {
    params.validate()?;
    if smoke.dims() != alpha.dims() {
        return Err(Error::dims("augment smoke vs alpha", smoke.dims(), alpha.dims()));
    }
    let (w, h) = smoke.dims();
    let ch = smoke.channels();
    let (sw, sh) = scaled_dims(w, h, params.scale)?;

    let mut img = resize_plane(w, h, ch, smoke.data(), sw, sh);
    let mut alf = resize_plane(w, h, 1, alpha.data(), sw, sh);
    if params.flip_horizontal {
        img = flip_plane(sw, sh, ch, &img);
        alf = flip_plane(sw, sh, 1, &alf);
    }
    let (rw, rh) = rotated_canvas(sw, sh, params.rotation_degrees);
    img = rotate_plane(sw, sh, ch, &img, params.rotation_degrees, rw, rh);
    alf = rotate_plane(sw, sh, 1, &alf, params.rotation_degrees, rw, rh);

    if ch == 3 {
        let tint = params.tint.map(S::from_f64_lossy);
        for px in img.chunks_exact_mut(3) {
            for (v, t) in px.iter_mut().zip(tint) {
                *v = (*v * t).clamp_unit();
            }
        }
    }
    let opacity = S::from_f64_lossy(params.opacity);
    for v in &mut alf {
        *v = *v * opacity;
    }

    Ok((
        RasterImage::new(rw, rh, ch, img)?,
        AlphaMatte::new(rw, rh, alf)?,
    ))
}

/// Alpha-over blend of one channel. The result is clamped into
/// `[min(s, b), max(s, b)]`: rounding must never push the blend outside the
/// interval spanned by its inputs.
#[inline]
pub(crate) fn blend<S: Scalar>(a: S, s: S, b: S) -> S {
    let lo = s.min(b);
    let hi = s.max(b);
    (a * s + (S::one() - a) * b).max(lo).min(hi)
}

/// Blends the plume over the background inside the anchored rectangle;
/// pixels outside it are the untouched background.
///
/// A single-channel plume is broadcast across the RGB channels.
pub fn composite<S: Scalar>(
    smoke: &RasterImage<S>,
    alpha: &AlphaMatte<S>,
    background: &RasterImage<S>,
    anchor: (u32, u32),
) -> Result<RasterImage<S>> {
    if background.channels() != 3 {
        return Err(Error::InvalidArgument(
            "composite background must be 3-channel".to_string(),
        ));
    }
    if smoke.dims() != alpha.dims() {
        return Err(Error::dims("composite smoke vs alpha", smoke.dims(), alpha.dims()));
    }
    let (pw, ph) = smoke.dims();
    let (bw, bh) = background.dims();
    let (ax, ay) = anchor;
    if ax as u64 + pw as u64 > bw as u64 || ay as u64 + ph as u64 > bh as u64 {
        return Err(Error::OutOfBounds {
            x: ax,
            y: ay,
            w: pw,
            h: ph,
            bg_w: bw,
            bg_h: bh,
        });
    }
    let mut out = background.data().to_vec();
    let row = bw as usize * 3;
    for y in 0..ph {
        for x in 0..pw {
            let a = alpha.get(x, y);
            let base = (ay + y) as usize * row + (ax + x) as usize * 3;
            for c in 0..3 {
                let s = if smoke.channels() == 3 {
                    smoke.get(x, y, c)
                } else {
                    smoke.get(x, y, 0)
                };
                out[base + c] = blend(a, s, out[base + c]);
            }
        }
    }
    RasterImage::new(bw, bh, 3, out)
}

/// Thresholds an alpha matte into a binary mask: smoke where `alpha >= threshold`.
pub fn derive_mask<S: Scalar>(alpha: &AlphaMatte<S>, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "mask threshold must be in (0, 1), got {threshold}"
        )));
    }
    let t = S::from_f64_lossy(threshold);
    Ok(BinaryMask::from_fn(alpha.width(), alpha.height(), |x, y| {
        alpha.get(x, y) >= t
    }))
}

/// Runs the full chain for one recipe: intensity alpha, augmentation,
/// compositing, mask derivation.
///
/// Returns the composite image, the mask in background coordinates (zero
/// outside the plume rectangle), and the placed full-frame alpha. The
/// result is a deterministic function of `(recipe, smoke, background,
/// mask_threshold)`.
pub fn generate_sample<S: Scalar>(
    recipe: &SampleRecipe,
    smoke: &RasterImage<S>,
    background: &RasterImage<S>,
    mask_threshold: f64,
) -> Result<Sample<S>> {
    let alpha = intensity_alpha(smoke, recipe.polarity);
    let rgb = smoke.to_rgb();
    let (aug_img, aug_alpha) = augment(&rgb, &alpha, &recipe.params)?;
    let anchor = recipe.params.anchor;
    let image = composite(&aug_img, &aug_alpha, background, anchor)?;
    let (bw, bh) = background.dims();
    let (ax, ay) = anchor;
    let full_alpha = AlphaMatte::from_fn(bw, bh, |x, y| {
        if x >= ax && y >= ay && x - ax < aug_alpha.width() && y - ay < aug_alpha.height() {
            aug_alpha.get(x - ax, y - ay)
        } else {
            S::zero()
        }
    });
    let mask = derive_mask(&full_alpha, mask_threshold)?;
    Ok(Sample {
        image,
        mask,
        alpha: full_alpha,
    })
}

/// Draws augmentation parameters for sample `index` under `master_seed`,
/// using the default ranges.
pub fn sample_params(
    master_seed: u64,
    index: u64,
    background_dims: (u32, u32),
    plume_dims: (u32, u32),
) -> Result<AugmentationParams> {
    sample_params_with(
        master_seed,
        index,
        background_dims,
        plume_dims,
        &AugmentationRanges::default(),
    )
}

/// Seeded parameter draw with explicit ranges.
///
/// Draw order is fixed: scale fraction, flip, rotation, tint (r, g, b),
/// opacity, then anchor. The drawn fraction targets `fraction *
/// background_width` as the plume width; the stored `scale` is the
/// resulting resize factor, capped at 1 so plumes are never upscaled. If
/// the scaled-and-rotated footprint does not fit the background the scale
/// fraction alone is redrawn, up to [`MAX_SCALE_RETRIES`] times.
pub fn sample_params_with(
    master_seed: u64,
    index: u64,
    background_dims: (u32, u32),
    plume_dims: (u32, u32),
    ranges: &AugmentationRanges,
) -> Result<AugmentationParams> {
    ranges.validate()?;
    let (bg_w, bg_h) = background_dims;
    let (pw, ph) = plume_dims;
    if bg_w == 0 || bg_h == 0 || pw == 0 || ph == 0 {
        return Err(Error::InvalidArgument(
            "background and plume dimensions must be positive".to_string(),
        ));
    }

    let mut draws = Draws::new(derive_sample_seed(master_seed, index));
    let mut fraction = draws.range(ranges.scale_fraction);
    let flip_horizontal = draws.flag();
    let rotation_degrees = draws.range(ranges.rotation_degrees);
    let tint = [
        draws.range(ranges.tint),
        draws.range(ranges.tint),
        draws.range(ranges.tint),
    ];
    let opacity = draws.range(ranges.opacity);

    let mut attempts = 1u32;
    let (scale, tw, th) = loop {
        let scale = (fraction * bg_w as f64 / pw as f64).min(1.0);
        match transformed_dims((pw, ph), scale, rotation_degrees) {
            Ok((tw, th)) if tw <= bg_w && th <= bg_h => break (scale, tw, th),
            _ => {
                if attempts > MAX_SCALE_RETRIES {
                    return Err(Error::NoFeasiblePlacement { attempts });
                }
                attempts += 1;
                fraction = draws.range(ranges.scale_fraction);
            }
        }
    };

    let anchor = (
        draws.below((bg_w - tw + 1) as u64) as u32,
        draws.below((bg_h - th + 1) as u64) as u32,
    );

    Ok(AugmentationParams {
        scale,
        flip_horizontal,
        rotation_degrees,
        tint,
        opacity,
        anchor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Deterministic pseudo-random image content for tests.
    fn noise_image(w: u32, h: u32, ch: usize, seed: u64) -> RasterImage<f64> {
        let mut state = seed;
        RasterImage::from_fn(w, h, ch, |_, _, _| {
            state = splitmix64(state);
            (state >> 11) as f64 / 9007199254740992.0
        })
    }

    fn noise_alpha(w: u32, h: u32, seed: u64) -> AlphaMatte<f64> {
        let mut state = seed;
        AlphaMatte::from_fn(w, h, |_, _| {
            state = splitmix64(state);
            (state >> 11) as f64 / 9007199254740992.0
        })
    }

    #[test]
    fn intensity_alpha_white_polarity_on_white_frame() {
        let smoke = RasterImage::<f64>::constant(3, 3, 3, 1.0);
        let alpha = intensity_alpha(&smoke, BackgroundPolarity::WhiteBackground);
        assert!(alpha.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intensity_alpha_dark_polarity_on_black_frame() {
        let smoke = RasterImage::<f64>::constant(3, 3, 1, 0.0);
        let alpha = intensity_alpha(&smoke, BackgroundPolarity::DarkBackground);
        assert!(alpha.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn intensity_alpha_complements_luma_on_white_polarity() {
        let smoke = RasterImage::<f64>::constant(2, 2, 1, 0.75);
        let alpha = intensity_alpha(&smoke, BackgroundPolarity::WhiteBackground);
        assert!(alpha.data().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn augment_identity_is_exact() {
        let smoke = noise_image(13, 9, 3, 1);
        let alpha = noise_alpha(13, 9, 2);
        let (img, alf) = augment(&smoke, &alpha, &AugmentationParams::identity((0, 0))).unwrap();
        assert_eq!(img, smoke);
        assert_eq!(alf, alpha);
    }

    #[test]
    fn augment_opacity_scales_alpha() {
        let smoke = RasterImage::<f64>::constant(4, 4, 3, 0.5);
        let alpha = AlphaMatte::<f64>::constant(4, 4, 1.0);
        let params = AugmentationParams {
            opacity: 0.5,
            ..AugmentationParams::identity((0, 0))
        };
        let (_, alf) = augment(&smoke, &alpha, &params).unwrap();
        assert!(alf.data().iter().all(|&v| v == 0.5));
    }

    /// Independent straightforward bilinear resampler used as the oracle.
    fn oracle_resize(src: &RasterImage<f64>, ow: u32, oh: u32) -> Vec<f64> {
        let (w, h) = src.dims();
        let ch = src.channels();
        let mut out = Vec::new();
        for j in 0..oh {
            for i in 0..ow {
                for c in 0..ch {
                    let sx = (i as f64 + 0.5) * (w as f64 / ow as f64) - 0.5;
                    let sy = (j as f64 + 0.5) * (h as f64 / oh as f64) - 0.5;
                    let x0 = sx.floor();
                    let y0 = sy.floor();
                    let (fx, fy) = (sx - x0, sy - y0);
                    let fetch = |x: f64, y: f64| {
                        let xi = (x.max(0.0) as u32).min(w - 1);
                        let yi = (y.max(0.0) as u32).min(h - 1);
                        src.get(xi, yi, c)
                    };
                    let t00 = fetch(x0, y0);
                    let t10 = fetch(x0 + 1.0, y0);
                    let t01 = fetch(x0, y0 + 1.0);
                    let t11 = fetch(x0 + 1.0, y0 + 1.0);
                    out.push(
                        (1.0 - fx) * (1.0 - fy) * t00
                            + fx * (1.0 - fy) * t10
                            + (1.0 - fx) * fy * t01
                            + fx * fy * t11,
                    );
                }
            }
        }
        out
    }

    #[test]
    fn augment_half_scale_matches_bilinear_oracle() {
        let smoke = noise_image(100, 80, 3, 7);
        let alpha = AlphaMatte::<f64>::constant(100, 80, 1.0);
        let params = AugmentationParams {
            scale: 0.5,
            ..AugmentationParams::identity((0, 0))
        };
        let (img, _) = augment(&smoke, &alpha, &params).unwrap();
        assert_eq!(img.dims(), (50, 40));
        let expected = oracle_resize(&smoke, 50, 40);
        for (a, b) in img.data().iter().zip(&expected) {
            assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn augment_rejects_degenerate_scale() {
        let smoke = RasterImage::<f64>::constant(2, 2, 1, 0.5);
        let alpha = AlphaMatte::<f64>::constant(2, 2, 1.0);
        let params = AugmentationParams {
            scale: 0.1,
            ..AugmentationParams::identity((0, 0))
        };
        assert!(augment(&smoke, &alpha, &params).is_err());
    }

    #[test]
    fn augment_flip_then_mask_commutes() {
        // Axis-aligned geometric consistency: thresholding the flipped alpha
        // equals flipping the thresholded mask.
        let alpha = noise_alpha(9, 5, 11);
        let smoke = RasterImage::<f64>::constant(9, 5, 1, 0.5);
        let params = AugmentationParams {
            flip_horizontal: true,
            ..AugmentationParams::identity((0, 0))
        };
        let (_, flipped) = augment(&smoke, &alpha, &params).unwrap();
        let mask_then_flip = {
            let m = derive_mask(&alpha, 0.5).unwrap();
            BinaryMask::from_fn(9, 5, |x, y| m.get(8 - x, y))
        };
        let flip_then_mask = derive_mask(&flipped, 0.5).unwrap();
        assert_eq!(flip_then_mask, mask_then_flip);
    }

    #[test]
    fn composite_zero_alpha_returns_background() {
        let smoke = noise_image(3, 3, 3, 5);
        let alpha = AlphaMatte::<f64>::constant(3, 3, 0.0);
        let bg = noise_image(6, 6, 3, 6);
        let out = composite(&smoke, &alpha, &bg, (2, 1)).unwrap();
        assert_eq!(out, bg);
    }

    #[test]
    fn composite_unit_alpha_copies_smoke() {
        let smoke = noise_image(3, 3, 3, 5);
        let alpha = AlphaMatte::<f64>::constant(3, 3, 1.0);
        let bg = noise_image(6, 6, 3, 6);
        let out = composite(&smoke, &alpha, &bg, (2, 1)).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                for c in 0..3 {
                    assert_eq!(out.get(2 + x, 1 + y, c), smoke.get(x, y, c));
                }
            }
        }
    }

    #[test]
    fn composite_midpoint() {
        let smoke = RasterImage::<f64>::constant(1, 1, 3, 1.0);
        let alpha = AlphaMatte::<f64>::constant(1, 1, 0.5);
        let bg = RasterImage::<f64>::constant(2, 2, 3, 0.0);
        let out = composite(&smoke, &alpha, &bg, (0, 0)).unwrap();
        assert_eq!(out.get(0, 0, 0), 0.5);
        assert_eq!(out.get(1, 1, 0), 0.0);
    }

    #[test]
    fn composite_rejects_out_of_bounds_anchor() {
        let smoke = RasterImage::<f64>::constant(3, 3, 3, 1.0);
        let alpha = AlphaMatte::<f64>::constant(3, 3, 1.0);
        let bg = RasterImage::<f64>::constant(4, 4, 3, 0.0);
        assert!(matches!(
            composite(&smoke, &alpha, &bg, (2, 0)),
            Err(Error::OutOfBounds { .. })
        ));
    }

    #[test]
    fn derive_mask_threshold_rule() {
        let alpha = AlphaMatte::new(3, 1, vec![0.05f64, 0.1, 0.3]).unwrap();
        let mask = derive_mask(&alpha, 0.1).unwrap();
        assert_eq!(mask.data(), &[0, 1, 1]);
    }

    #[test]
    fn derive_mask_constant_cases() {
        let zeros = AlphaMatte::<f64>::constant(4, 4, 0.0);
        assert_eq!(derive_mask(&zeros, 0.1).unwrap().count_ones(), 0);
        let ones = AlphaMatte::<f64>::constant(4, 4, 1.0);
        assert_eq!(derive_mask(&ones, 0.1).unwrap().count_ones(), 16);
    }

    #[test]
    fn derive_mask_rejects_bad_threshold() {
        let alpha = AlphaMatte::<f64>::constant(1, 1, 0.5);
        assert!(derive_mask(&alpha, 0.0).is_err());
        assert!(derive_mask(&alpha, 1.0).is_err());
    }

    fn unit_recipe(anchor: (u32, u32)) -> SampleRecipe {
        SampleRecipe {
            smoke_source: "smoke".to_string(),
            background_source: "bg".to_string(),
            polarity: BackgroundPolarity::DarkBackground,
            params: AugmentationParams::identity(anchor),
            seed: 0,
        }
    }

    #[test]
    fn generate_sample_unit_alpha_mask_is_the_rectangle() {
        // All-white plume under dark polarity gives alpha = 1 everywhere.
        let smoke = RasterImage::<f64>::constant(2, 2, 3, 1.0);
        let bg = RasterImage::<f64>::constant(4, 4, 3, 0.0);
        let sample = generate_sample(&unit_recipe((1, 2)), &smoke, &bg, 0.1).unwrap();
        let expected = BinaryMask::from_fn(4, 4, |x, y| (1..3).contains(&x) && (2..4).contains(&y));
        assert_eq!(sample.mask, expected);
        assert_eq!(sample.mask.count_ones(), 4);
    }

    #[test]
    fn generate_sample_is_deterministic() {
        let smoke = noise_image(5, 4, 3, 21);
        let bg = noise_image(10, 8, 3, 22);
        let mut recipe = unit_recipe((3, 2));
        recipe.params.scale = 0.75;
        recipe.params.rotation_degrees = 10.0;
        recipe.params.tint = [0.9, 1.1, 1.0];
        recipe.params.opacity = 0.7;
        let a = generate_sample(&recipe, &smoke, &bg, 0.1).unwrap();
        let b = generate_sample(&recipe, &smoke, &bg, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn generate_sample_matches_scalar_loop_oracle() {
        // 4x4 background, 2x2 plume, identity transform: every stage is
        // recomputed here with plain per-pixel loops.
        let smoke = RasterImage::new(
            2,
            2,
            3,
            vec![
                0.2, 0.4, 0.6, 0.8, 0.6, 0.4, //
                0.1, 0.3, 0.5, 0.7, 0.9, 0.2,
            ],
        )
        .unwrap();
        let bg = noise_image(4, 4, 3, 33);
        let anchor = (1u32, 1u32);
        let sample = generate_sample(&unit_recipe(anchor), &smoke, &bg, 0.1).unwrap();

        for y in 0..4u32 {
            for x in 0..4u32 {
                let inside = (1..3).contains(&x) && (1..3).contains(&y);
                let a = if inside {
                    let (px, py) = (x - 1, y - 1);
                    let b = smoke.get(px, py, 2);
                    b + 0.299 * (smoke.get(px, py, 0) - b) + 0.587 * (smoke.get(px, py, 1) - b)
                } else {
                    0.0
                };
                assert_eq!(sample.alpha.get(x, y), a, "alpha at ({x},{y})");
                assert_eq!(sample.mask.get(x, y), a >= 0.1, "mask at ({x},{y})");
                for c in 0..3 {
                    let expected = if inside {
                        let s = smoke.get(x - 1, y - 1, c);
                        let b = bg.get(x, y, c);
                        (a * s + (1.0 - a) * b).max(s.min(b)).min(s.max(b))
                    } else {
                        bg.get(x, y, c)
                    };
                    assert_eq!(sample.image.get(x, y, c), expected, "image at ({x},{y},{c})");
                }
            }
        }
    }

    #[test]
    fn sample_params_is_deterministic() {
        let a = sample_params(42, 3, (200, 200), (50, 40)).unwrap();
        let b = sample_params(42, 3, (200, 200), (50, 40)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_params_distinct_across_indices() {
        // Golden values frozen from the fixed seed-derivation scheme; a
        // change in any drawn field means the stream layout changed.
        let p0 = sample_params(7, 0, (200, 200), (200, 200)).unwrap();
        let p1 = sample_params(7, 1, (200, 200), (200, 200)).unwrap();
        assert_ne!(p0, p1);
        assert_eq!(derive_sample_seed(7, 0), GOLDEN_SEED_7_0);
        assert_eq!(derive_sample_seed(7, 1), GOLDEN_SEED_7_1);
        assert_eq!(p0, GOLDEN_PARAMS_7_0);
    }

    // Frozen constants for the golden test above.
    const GOLDEN_SEED_7_0: u64 = 5635105639907327770;
    const GOLDEN_SEED_7_1: u64 = 18090291632519621350;
    const GOLDEN_PARAMS_7_0: AugmentationParams = AugmentationParams {
        scale: 0.14571474335388432,
        flip_horizontal: false,
        rotation_degrees: -12.862894937008635,
        tint: [0.8640614660497423, 1.0253213601028428, 1.0564192156496108],
        opacity: 0.47385834555356854,
        anchor: (55, 21),
    };

    #[test]
    fn sample_params_monte_carlo_bounds() {
        // Equal plume and background dims make the stored scale equal the
        // drawn fraction, so the empirical range checks the draw directly.
        let mut scale = (f64::MAX, f64::MIN);
        let mut opacity = (f64::MAX, f64::MIN);
        for i in 0..10_000u64 {
            let p = sample_params(99, i, (200, 200), (200, 200)).unwrap();
            scale = (scale.0.min(p.scale), scale.1.max(p.scale));
            opacity = (opacity.0.min(p.opacity), opacity.1.max(p.opacity));
            assert!((0.1..=0.6).contains(&p.scale));
            assert!((0.3..=1.0).contains(&p.opacity));
            assert!((-15.0..=15.0).contains(&p.rotation_degrees));
            assert!(p.tint.iter().all(|t| (0.8..=1.2).contains(t)));
            let (tw, th) = transformed_dims((200, 200), p.scale, p.rotation_degrees).unwrap();
            assert!(p.anchor.0 + tw <= 200 && p.anchor.1 + th <= 200);
        }
        assert!(scale.0 < 0.105 && scale.1 > 0.595, "scale range {scale:?}");
        assert!(opacity.0 < 0.31 && opacity.1 > 0.99, "opacity range {opacity:?}");
    }

    #[test]
    fn sample_params_reports_infeasible_placement() {
        // A 4x4000 plume can never fit a 64x64 background at any drawn scale.
        let err = sample_params(1, 0, (64, 64), (4, 4000)).unwrap_err();
        assert!(matches!(err, Error::NoFeasiblePlacement { .. }), "{err}");
    }

    #[test]
    fn ranges_must_stay_within_type_bounds() {
        let ranges = AugmentationRanges {
            tint: (0.5, 1.2),
            ..AugmentationRanges::default()
        };
        assert!(ranges.validate().is_err());
        let ranges = AugmentationRanges {
            rotation_degrees: (-30.0, 0.0),
            ..AugmentationRanges::default()
        };
        assert!(ranges.validate().is_err());
    }

    proptest! {
        // Convexity: each composited channel lies between the two inputs.
        #[test]
        fn blend_stays_within_input_interval(
            a in 0.0f64..=1.0,
            s in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let out = blend(a, s, b);
            prop_assert!(out >= s.min(b) && out <= s.max(b));
        }

        #[test]
        fn composite_identities_hold(seed in proptest::num::u64::ANY) {
            let smoke = noise_image(4, 3, 3, seed);
            let bg = noise_image(8, 6, 3, splitmix64(seed));
            let zero = AlphaMatte::<f64>::constant(4, 3, 0.0);
            let one = AlphaMatte::<f64>::constant(4, 3, 1.0);
            let out0 = composite(&smoke, &zero, &bg, (2, 2)).unwrap();
            prop_assert_eq!(out0, bg.clone());
            let out1 = composite(&smoke, &one, &bg, (2, 2)).unwrap();
            for y in 0..3u32 {
                for x in 0..4u32 {
                    for c in 0..3 {
                        prop_assert_eq!(out1.get(2 + x, 2 + y, c), smoke.get(x, y, c));
                    }
                }
            }
        }
    }
}
