//! Full-chain exercise: seeded parameters, sample generation, PNG
//! round-trip, trimap derivation, and evaluation all working together.

use plume_core::compose::{
    derive_mask, generate_sample, sample_params, splitmix64, BackgroundPolarity, SampleRecipe,
};
use plume_core::matting::{trimap_from_alpha, validate_trimap, TrimapThresholds};
use plume_core::metrics::MeanIouAccumulator;
use plume_core::png_io::{load_png, save_png};
use plume_core::raster::{AlphaMatte, RasterImage};

fn noise(w: u32, h: u32, seed: u64) -> RasterImage<f64> {
    let mut state = seed;
    RasterImage::from_fn(w, h, 3, |_, _, _| {
        state = splitmix64(state);
        (state >> 11) as f64 / 9007199254740992.0
    })
}

/// A bright synthetic blob on black, so dark polarity yields a strong alpha.
fn blob(w: u32, h: u32) -> RasterImage<f64> {
    let (cx, cy) = ((w - 1) as f64 / 2.0, (h - 1) as f64 / 2.0);
    let r = w.min(h) as f64 / 2.0;
    RasterImage::from_fn(w, h, 3, |x, y, _| {
        let d = ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt();
        (1.0 - d / r).max(0.0)
    })
}

#[test]
fn generated_sample_survives_storage_and_self_evaluates_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let smoke = blob(40, 32);
    let background = noise(96, 64, 11);

    let params = sample_params(123, 0, background.dims(), smoke.dims()).unwrap();
    let recipe = SampleRecipe {
        smoke_source: "blob".to_string(),
        background_source: "noise".to_string(),
        polarity: BackgroundPolarity::DarkBackground,
        params,
        seed: 123,
    };
    let sample = generate_sample(&recipe, &smoke, &background, 0.1).unwrap();

    // Mask/alpha consistency straight out of the generator.
    let rederived = derive_mask(&sample.alpha, 0.1).unwrap();
    assert_eq!(rederived, sample.mask);

    // Snap the alpha onto the storage lattice, persist everything, and
    // check the stored artifacts stay self-consistent.
    let alpha_q = sample.alpha.quantized();
    let stored_mask = derive_mask(&alpha_q, 0.1).unwrap();
    let image_path = dir.path().join("image.png");
    let mask_path = dir.path().join("mask.png");
    let alpha_path = dir.path().join("alpha.png");
    save_png(&sample.image, &image_path).unwrap();
    save_png(&stored_mask, &mask_path).unwrap();
    save_png(&alpha_q, &alpha_path).unwrap();

    let alpha_back = AlphaMatte::from_raster(&load_png::<f64>(&alpha_path).unwrap()).unwrap();
    assert_eq!(alpha_back, alpha_q);
    let mask_plane = AlphaMatte::from_raster(&load_png::<f64>(&mask_path).unwrap()).unwrap();
    let mask_back = derive_mask(&mask_plane, 0.5).unwrap();
    assert_eq!(mask_back, stored_mask);
    assert_eq!(derive_mask(&alpha_back, 0.1).unwrap(), stored_mask);

    let image_back = load_png::<f64>(&image_path).unwrap();
    assert_eq!(image_back, sample.image.quantized());

    // Trimap from the stored alpha agrees with the stored mask wherever it
    // is definite, for thresholds nested inside the mask threshold.
    let trimap = trimap_from_alpha(
        &alpha_q,
        &TrimapThresholds {
            fg_min: 0.95,
            bg_max: 0.05,
            band_radius: 2,
        },
    )
    .unwrap();
    let report = validate_trimap(&trimap, &stored_mask).unwrap();
    assert_eq!(report.fg_violations, 0);
    assert_eq!(
        report.label_counts.iter().sum::<u64>(),
        96 * 64,
        "partition covers the frame"
    );

    // Self-evaluation of the stored mask is a perfect score.
    let mut acc = MeanIouAccumulator::new();
    acc.add("sample", &stored_mask, &stored_mask).unwrap();
    let eval = acc.finish("selfcheck").unwrap();
    assert_eq!(eval.miou_percent, 100.0);
}
