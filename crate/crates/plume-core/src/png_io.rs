//! 8/16-bit PNG decoding into unit-interval rasters and 8-bit encoding back.
//!
//! Decoding maps channel values to `[0, 1]` by `v / (2^depth - 1)`; encoding
//! quantizes by round-half-up of `v * 255`. An image saved and re-loaded
//! therefore reproduces already-quantized values bit-exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::{quantize_unit, AlphaMatte, BinaryMask, RasterImage, Trimap};
use crate::scalar::Scalar;

/// Types that encode to an 8-bit gray or RGB PNG.
pub trait PngEncodable {
    fn png_dims(&self) -> (u32, u32);
    fn png_color(&self) -> png::ColorType;
    fn png_bytes(&self) -> Vec<u8>;
}

impl<S: Scalar> PngEncodable for RasterImage<S> {
    fn png_dims(&self) -> (u32, u32) {
        self.dims()
    }

    fn png_color(&self) -> png::ColorType {
        if self.channels() == 1 {
            png::ColorType::Grayscale
        } else {
            png::ColorType::Rgb
        }
    }

    fn png_bytes(&self) -> Vec<u8> {
        self.data().iter().map(|&v| quantize_unit(v)).collect()
    }
}

impl<S: Scalar> PngEncodable for AlphaMatte<S> {
    fn png_dims(&self) -> (u32, u32) {
        self.dims()
    }

    fn png_color(&self) -> png::ColorType {
        png::ColorType::Grayscale
    }

    fn png_bytes(&self) -> Vec<u8> {
        self.data().iter().map(|&v| quantize_unit(v)).collect()
    }
}

impl PngEncodable for BinaryMask {
    fn png_dims(&self) -> (u32, u32) {
        self.dims()
    }

    fn png_color(&self) -> png::ColorType {
        png::ColorType::Grayscale
    }

    fn png_bytes(&self) -> Vec<u8> {
        self.data().iter().map(|&v| v * 255).collect()
    }
}

impl PngEncodable for Trimap {
    fn png_dims(&self) -> (u32, u32) {
        self.dims()
    }

    fn png_color(&self) -> png::ColorType {
        png::ColorType::Grayscale
    }

    fn png_bytes(&self) -> Vec<u8> {
        self.data().iter().map(|l| l.byte()).collect()
    }
}

/// Writes an 8-bit PNG. Masks encode as `{0, 255}`, trimaps as `{0, 128, 255}`.
pub fn save_png(value: &impl PngEncodable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (width, height) = value.png_dims();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width, height);
    encoder.set_color(value.png_color());
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header().map_err(|e| Error::PngEncode {
        path: path.to_path_buf(),
        source: e,
    })?;
    writer
        .write_image_data(&value.png_bytes())
        .map_err(|e| Error::PngEncode {
            path: path.to_path_buf(),
            source: e,
        })?;
    writer.finish().map_err(|e| Error::PngEncode {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Decodes an 8- or 16-bit grayscale/RGB/RGBA PNG into a unit-interval raster.
///
/// An alpha channel is dropped with a logged warning; palette images and
/// sub-byte bit depths are rejected.
pub fn load_png<S: Scalar>(path: impl AsRef<Path>) -> Result<RasterImage<S>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| Error::PngDecode {
        path: path.to_path_buf(),
        source: e,
    })?;

    let info = reader.info();
    let color = info.color_type;
    let depth = info.bit_depth;
    let (width, height) = (info.width, info.height);

    if color == png::ColorType::Indexed {
        return Err(Error::UnsupportedPng {
            path: path.to_path_buf(),
            reason: "palette (indexed) color is not supported".to_string(),
        });
    }
    let bytes_per_sample = match depth {
        png::BitDepth::Eight => 1,
        png::BitDepth::Sixteen => 2,
        other => {
            return Err(Error::UnsupportedPng {
                path: path.to_path_buf(),
                reason: format!("bit depth {other:?} is not supported (need 8 or 16)"),
            })
        }
    };
    let src_channels = color.samples();
    let keep_channels = match src_channels {
        1 | 2 => 1,
        3 | 4 => 3,
        n => {
            return Err(Error::UnsupportedPng {
                path: path.to_path_buf(),
                reason: format!("unexpected sample count {n}"),
            })
        }
    };
    if src_channels != keep_channels {
        log::warn!("{}: alpha channel ignored", path.display());
    }

    let mut buf = vec![0u8; reader.output_buffer_size()];
    let frame = reader.next_frame(&mut buf).map_err(|e| Error::PngDecode {
        path: path.to_path_buf(),
        source: e,
    })?;
    let bytes = &buf[..frame.buffer_size()];

    let max = match depth {
        png::BitDepth::Eight => 255.0,
        _ => 65535.0,
    };
    let pixels = width as usize * height as usize;
    let mut data = Vec::with_capacity(pixels * keep_channels);
    for p in 0..pixels {
        for c in 0..keep_channels {
            let s = (p * src_channels + c) * bytes_per_sample;
            let raw = if bytes_per_sample == 1 {
                bytes[s] as f64
            } else {
                u16::from_be_bytes([bytes[s], bytes[s + 1]]) as f64
            };
            data.push(S::from_f64_lossy(raw / max));
        }
    }
    RasterImage::new(width, height, keep_channels, data)
}

/// Reads just the header of a PNG and returns its dimensions.
pub fn png_dims(path: impl AsRef<Path>) -> Result<(u32, u32)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let decoder = png::Decoder::new(BufReader::new(file));
    let reader = decoder.read_info().map_err(|e| Error::PngDecode {
        path: path.to_path_buf(),
        source: e,
    })?;
    let info = reader.info();
    Ok((info.width, info.height))
}
