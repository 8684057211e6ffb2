//! Raster containers shared by the whole pipeline.
//!
//! Pixel data is kept as unit-interval reals; quantization to 8-bit bytes
//! happens only at the PNG boundary (see [`crate::png_io`]). Label grids
//! ([`BinaryMask`], [`Trimap`]) are integer-valued and never interpolated.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rec.601 luma weights.
const LUMA_R: f64 = 0.299;
const LUMA_G: f64 = 0.587;

/// Row-major interleaved image with 1 (gray) or 3 (RGB) channels and
/// channel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage<S: Scalar> {
    width: u32,
    height: u32,
    channels: usize,
    data: Vec<S>,
}

impl<S: Scalar> RasterImage<S> {
    /// Builds an image from raw data, validating length and value range.
    pub fn new(width: u32, height: u32, channels: usize, data: Vec<S>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channel count must be 1 or 3, got {channels}"
            )));
        }
        let expected = width as usize * height as usize * channels;
        if data.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {width}x{height}x{channels} = {expected}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| **v < S::zero() || **v > S::one()) {
            return Err(Error::InvalidArgument(format!(
                "pixel value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y, c)`; results are clamped to `[0, 1]`.
    pub fn from_fn(
        width: u32,
        height: u32,
        channels: usize,
        mut f: impl FnMut(u32, u32, usize) -> S,
    ) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        let mut data = Vec::with_capacity(width as usize * height as usize * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp_unit());
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    /// Constant-valued image.
    pub fn constant(width: u32, height: u32, channels: usize, value: S) -> Self {
        Self::from_fn(width, height, channels, |_, _, _| value)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: usize) -> S {
        debug_assert!(x < self.width && y < self.height && c < self.channels);
        self.data[(y as usize * self.width as usize + x as usize) * self.channels + c]
    }

    /// Rec.601 luma; a single-channel image is returned unchanged.
    pub fn luminance(&self) -> RasterImage<S> {
        if self.channels == 1 {
            return self.clone();
        }
        let wr = S::from_f64_lossy(LUMA_R);
        let wg = S::from_f64_lossy(LUMA_G);
        // Rearranged so gray pixels map to themselves exactly; the blue
        // weight is the implied 1 - 0.299 - 0.587 = 0.114.
        RasterImage::from_fn(self.width, self.height, 1, |x, y, _| {
            let b = self.get(x, y, 2);
            b + wr * (self.get(x, y, 0) - b) + wg * (self.get(x, y, 1) - b)
        })
    }

    /// Replicates a gray image into RGB; a 3-channel image is returned unchanged.
    pub fn to_rgb(&self) -> RasterImage<S> {
        if self.channels == 3 {
            return self.clone();
        }
        RasterImage::from_fn(self.width, self.height, 3, |x, y, _| self.get(x, y, 0))
    }

    /// Snaps every value onto the 256-level storage lattice (the values an
    /// 8-bit PNG round-trip preserves exactly).
    pub fn quantized(&self) -> RasterImage<S> {
        RasterImage::from_fn(self.width, self.height, self.channels, |x, y, c| {
            dequantize_byte(quantize_unit(self.get(x, y, c)))
        })
    }
}

/// Per-pixel opacity in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaMatte<S: Scalar> {
    width: u32,
    height: u32,
    data: Vec<S>,
}

impl<S: Scalar> AlphaMatte<S> {
    pub fn new(width: u32, height: u32, data: Vec<S>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "matte dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| **v < S::zero() || **v > S::one()) {
            return Err(Error::InvalidArgument(format!(
                "alpha value {v} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds a matte by evaluating `f(x, y)`; results are clamped to `[0, 1]`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> S) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y).clamp_unit());
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn constant(width: u32, height: u32, value: S) -> Self {
        Self::from_fn(width, height, |_, _| value)
    }

    /// Reinterprets a single-channel image as a matte.
    pub fn from_raster(image: &RasterImage<S>) -> Result<Self> {
        if image.channels() != 1 {
            return Err(Error::InvalidArgument(format!(
                "matte source must be single-channel, got {} channels",
                image.channels()
            )));
        }
        Ok(Self {
            width: image.width(),
            height: image.height(),
            data: image.data().to_vec(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> S {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Snaps every value onto the 256-level storage lattice.
    pub fn quantized(&self) -> AlphaMatte<S> {
        AlphaMatte::from_fn(self.width, self.height, |x, y| {
            dequantize_byte(quantize_unit(self.get(x, y)))
        })
    }
}

/// Per-pixel `{0: background, 1: smoke}` labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::InvalidArgument(
                "mask values must be 0 or 1".to_string(),
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: u32, height: u32) -> Self {
        Self::from_fn(width, height, |_, _| false)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize] == 1
    }

    pub fn count_ones(&self) -> u64 {
        self.data.iter().map(|&v| v as u64).sum()
    }
}

/// Three-way matting label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrimapLabel {
    Background,
    Unknown,
    Foreground,
}

impl TrimapLabel {
    /// The 8-bit PNG encoding: black, mid-gray, white.
    pub fn byte(self) -> u8 {
        match self {
            TrimapLabel::Background => 0,
            TrimapLabel::Unknown => 128,
            TrimapLabel::Foreground => 255,
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(TrimapLabel::Background),
            128 => Some(TrimapLabel::Unknown),
            255 => Some(TrimapLabel::Foreground),
            _ => None,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            TrimapLabel::Background => 0,
            TrimapLabel::Unknown => 1,
            TrimapLabel::Foreground => 2,
        }
    }
}

/// Per-pixel three-way partition into background / unknown / foreground.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trimap {
    width: u32,
    height: u32,
    data: Vec<TrimapLabel>,
}

impl Trimap {
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> TrimapLabel) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[TrimapLabel] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> TrimapLabel {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Pixel counts as `[background, unknown, foreground]`.
    pub fn label_counts(&self) -> [u64; 3] {
        let mut counts = [0u64; 3];
        for label in &self.data {
            counts[label.index()] += 1;
        }
        counts
    }
}

/// Round-half-up quantization of a unit-interval value to a byte.
#[inline]
pub fn quantize_unit<S: Scalar>(v: S) -> u8 {
    let scaled = (v * S::from_f64_lossy(255.0) + S::from_f64_lossy(0.5)).floor();
    let b = scaled.to_f64_lossy();
    b.clamp(0.0, 255.0) as u8
}

/// Maps a byte back into `[0, 1]` by `b / 255`.
#[inline]
pub fn dequantize_byte<S: Scalar>(b: u8) -> S {
    S::from_f64_lossy(b as f64) / S::from_f64_lossy(255.0)
}
