use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar carrying pixel values and kernel arithmetic.
///
/// All raster data, alpha mattes, probability maps, and loss kernels are
/// generic over this trait; pick a precision through the aliases at the
/// crate root (`RasterImage32`, `RasterImage64`, ...).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts a finite `f64` (configuration value, constant) into `Self`.
    fn from_f64_lossy(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite f64 constant")
    }

    /// Widens to `f64` for reporting and serialization.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar widens to f64")
    }

    /// Clamps into the unit interval.
    fn clamp_unit(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
