//! Binary dilation and erosion with a square (Chebyshev) structuring
//! element. The neighbourhood is clipped at the frame: out-of-frame
//! positions contribute nothing to dilation and are not required by
//! erosion, so an all-ones mask erodes to itself.

use crate::raster::BinaryMask;

/// Horizontal pass of the separable square window, combining with `any`
/// (dilate) or `all` (erode).
fn horizontal_pass(mask: &BinaryMask, radius: u32, dilate: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let r = radius as i64;
    BinaryMask::from_fn(w, h, |x, y| {
        let lo = (x as i64 - r).max(0) as u32;
        let hi = (x as i64 + r).min(w as i64 - 1) as u32;
        if dilate {
            (lo..=hi).any(|xi| mask.get(xi, y))
        } else {
            (lo..=hi).all(|xi| mask.get(xi, y))
        }
    })
}

fn vertical_pass(mask: &BinaryMask, radius: u32, dilate: bool) -> BinaryMask {
    let (w, h) = mask.dims();
    let r = radius as i64;
    BinaryMask::from_fn(w, h, |x, y| {
        let lo = (y as i64 - r).max(0) as u32;
        let hi = (y as i64 + r).min(h as i64 - 1) as u32;
        if dilate {
            (lo..=hi).any(|yi| mask.get(x, yi))
        } else {
            (lo..=hi).all(|yi| mask.get(x, yi))
        }
    })
}

/// Sets every pixel within Chebyshev distance `radius` of a set pixel.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    vertical_pass(&horizontal_pass(mask, radius, true), radius, true)
}

/// Keeps a pixel only if every in-frame pixel within Chebyshev distance
/// `radius` is set.
pub fn erode(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    vertical_pass(&horizontal_pass(mask, radius, false), radius, false)
}
