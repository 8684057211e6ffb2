//! Deterministic toolkit for building annotated smoke-segmentation datasets.
//!
//! The crate covers four concerns:
//!
//! - **Compositing** ([`compose`]): derives per-pixel opacity from the
//!   intensity of a smoke frame, applies seeded geometric/photometric
//!   augmentation, and alpha-blends the plume onto background images,
//!   producing reproducible (image, mask, alpha) training triples.
//! - **Matting** ([`matting`]): trimap generation from alphas or masks,
//!   full-frame matte compositing, and trimap/mask consistency checks.
//! - **Annotations** ([`via`]): VGG Image Annotator project import and
//!   polygon/rect rasterization into ground-truth masks.
//! - **Metrics** ([`metrics`]): confusion counts, IoU/mIoU reporting, and
//!   the entropy / cross-entropy / adversarial loss kernels used to study
//!   synthetic-to-real domain transfer.
//!
//! Pixel math is generic over the [`Scalar`] precision; the `*32`/`*64`
//! aliases below pick a concrete type. Values stay in `[0, 1]` end to end
//! and quantization to bytes happens only at the PNG boundary.
//!
//! Every operation is a pure function of its inputs: identical inputs give
//! identical outputs, independent of thread count or evaluation order.

pub mod compose;
pub mod error;
pub mod matting;
pub mod metrics;
pub mod morphology;
pub mod png_io;
pub mod raster;
pub mod scalar;
pub mod via;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type RasterImage32 = raster::RasterImage<f32>;
pub type RasterImage64 = raster::RasterImage<f64>;
pub type AlphaMatte32 = raster::AlphaMatte<f32>;
pub type AlphaMatte64 = raster::AlphaMatte<f64>;
pub type ProbabilityMap32 = metrics::ProbabilityMap<f32>;
pub type ProbabilityMap64 = metrics::ProbabilityMap<f64>;
