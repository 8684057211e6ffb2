//! VGG Image Annotator (VIA) v2 project import and region rasterization.
//!
//! Both export layouts are accepted: the project wrapper holding
//! `_via_img_metadata` and the bare metadata map. Only polygon and rect
//! regions rasterize; other shapes (circle, ellipse, polyline, point) are
//! counted as skipped rather than approximated, so ground truth is never
//! silently distorted.
//!
//! Fill convention: a pixel `(i, j)` belongs to a region when its center
//! `(i + 0.5, j + 0.5)` is covered, with the even-odd rule for polygons.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::png_io::save_png;
use crate::raster::BinaryMask;

/// A rasterizable annotation region in pixel coordinates.
#[derive(Clone, Debug, PartialEq)]
pub enum ViaRegion {
    /// Closed polygon with at least three vertices.
    Polygon { points: Vec<(f64, f64)> },
    /// Axis-aligned rectangle with non-negative extent.
    Rect {
        x: f64,
        y: f64,
        width: f64,
        height: f64,
    },
}

/// One annotated image.
#[derive(Clone, Debug, PartialEq)]
pub struct ViaEntry {
    pub filename: String,
    /// Dimensions embedded in `file_attributes`, when present.
    pub dims: Option<(u32, u32)>,
    pub regions: Vec<ViaRegion>,
    /// Unsupported shape name -> occurrence count.
    pub skipped_shapes: BTreeMap<String, usize>,
}

/// A parsed VIA project, entries ordered by metadata key.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ViaProject {
    pub entries: Vec<ViaEntry>,
}

impl ViaProject {
    /// Parses VIA v2 project JSON (wrapper or bare metadata map).
    pub fn parse(json_text: &str) -> Result<Self> {
        parse_via(json_text)
    }

    pub fn entry(&self, filename: &str) -> Option<&ViaEntry> {
        self.entries.iter().find(|e| e.filename == filename)
    }

    /// Aggregated skipped-shape counts over all entries.
    pub fn skipped_shape_counts(&self) -> BTreeMap<String, usize> {
        let mut total = BTreeMap::new();
        for entry in &self.entries {
            for (name, n) in &entry.skipped_shapes {
                *total.entry(name.clone()).or_insert(0) += n;
            }
        }
        total
    }

    pub fn total_skipped_shapes(&self) -> usize {
        self.skipped_shape_counts().values().sum()
    }

    /// Re-serializes the supported subset as VIA v2 project JSON.
    pub fn to_json(&self) -> String {
        let mut metadata = Map::new();
        for entry in &self.entries {
            let regions: Vec<Value> = entry
                .regions
                .iter()
                .map(|region| {
                    let shape = match region {
                        ViaRegion::Polygon { points } => json!({
                            "name": "polygon",
                            "all_points_x": points.iter().map(|p| p.0).collect::<Vec<_>>(),
                            "all_points_y": points.iter().map(|p| p.1).collect::<Vec<_>>(),
                        }),
                        ViaRegion::Rect {
                            x,
                            y,
                            width,
                            height,
                        } => json!({
                            "name": "rect",
                            "x": x,
                            "y": y,
                            "width": width,
                            "height": height,
                        }),
                    };
                    json!({ "shape_attributes": shape, "region_attributes": {} })
                })
                .collect();
            let mut file_attributes = Map::new();
            if let Some((w, h)) = entry.dims {
                file_attributes.insert("width".to_string(), json!(w));
                file_attributes.insert("height".to_string(), json!(h));
            }
            metadata.insert(
                entry.filename.clone(),
                json!({
                    "filename": entry.filename,
                    "regions": regions,
                    "file_attributes": Value::Object(file_attributes),
                }),
            );
        }
        serde_json::to_string_pretty(&json!({ "_via_img_metadata": Value::Object(metadata) }))
            .expect("serializable project")
    }
}

fn entry_err(entry: &str, reason: impl Into<String>) -> Error {
    Error::AnnotationEntry {
        entry: entry.to_string(),
        reason: reason.into(),
    }
}

fn number(v: &Value) -> Option<f64> {
    v.as_f64()
}

fn parse_region(entry: &str, region: &Value) -> Result<std::result::Result<ViaRegion, String>> {
    let shape = region
        .get("shape_attributes")
        .and_then(Value::as_object)
        .ok_or_else(|| entry_err(entry, "region is missing shape_attributes"))?;
    let name = shape
        .get("name")
        .and_then(Value::as_str)
        .ok_or_else(|| entry_err(entry, "shape_attributes is missing name"))?;
    match name {
        "polygon" => {
            let xs = shape
                .get("all_points_x")
                .and_then(Value::as_array)
                .ok_or_else(|| entry_err(entry, "polygon is missing all_points_x"))?;
            let ys = shape
                .get("all_points_y")
                .and_then(Value::as_array)
                .ok_or_else(|| entry_err(entry, "polygon is missing all_points_y"))?;
            if xs.len() != ys.len() {
                return Err(entry_err(
                    entry,
                    format!(
                        "polygon coordinate lists differ in length ({} vs {})",
                        xs.len(),
                        ys.len()
                    ),
                ));
            }
            if xs.len() < 3 {
                return Err(entry_err(
                    entry,
                    format!("polygon needs at least 3 vertices, got {}", xs.len()),
                ));
            }
            let points = xs
                .iter()
                .zip(ys)
                .map(|(x, y)| {
                    Some((number(x)?, number(y)?))
                })
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| entry_err(entry, "polygon coordinates must be numbers"))?;
            Ok(Ok(ViaRegion::Polygon { points }))
        }
        "rect" => {
            let field = |key: &str| -> Result<f64> {
                shape
                    .get(key)
                    .and_then(number)
                    .ok_or_else(|| entry_err(entry, format!("rect is missing numeric '{key}'")))
            };
            let (x, y) = (field("x")?, field("y")?);
            let (width, height) = (field("width")?, field("height")?);
            if width < 0.0 || height < 0.0 {
                return Err(entry_err(
                    entry,
                    format!("rect extent must be non-negative, got {width}x{height}"),
                ));
            }
            Ok(Ok(ViaRegion::Rect {
                x,
                y,
                width,
                height,
            }))
        }
        other => Ok(Err(other.to_string())),
    }
}

/// Parses VIA project JSON into the supported region subset.
pub fn parse_via(json_text: &str) -> Result<ViaProject> {
    let root: Value = serde_json::from_str(json_text)?;
    let root_map = root
        .as_object()
        .ok_or_else(|| entry_err("<root>", "project json must be an object"))?;
    let metadata = match root_map.get("_via_img_metadata") {
        Some(Value::Object(map)) => map,
        Some(_) => return Err(entry_err("<root>", "_via_img_metadata must be an object")),
        None => root_map,
    };

    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (key, value) in metadata {
        // Project wrappers carry bookkeeping keys next to the metadata map.
        if key.starts_with("_via_") {
            continue;
        }
        let obj = value
            .as_object()
            .ok_or_else(|| entry_err(key, "image entry must be an object"))?;
        let filename = obj
            .get("filename")
            .and_then(Value::as_str)
            .ok_or_else(|| entry_err(key, "image entry is missing filename"))?
            .to_string();
        if !seen.insert(filename.clone()) {
            return Err(entry_err(&filename, "duplicate filename in project"));
        }
        let mut regions = Vec::new();
        let mut skipped_shapes = BTreeMap::new();
        if let Some(list) = obj.get("regions") {
            let list = list
                .as_array()
                .ok_or_else(|| entry_err(&filename, "regions must be an array"))?;
            for region in list {
                match parse_region(&filename, region)? {
                    Ok(region) => regions.push(region),
                    Err(shape) => *skipped_shapes.entry(shape).or_insert(0) += 1,
                }
            }
        }
        let dims = obj.get("file_attributes").and_then(|attrs| {
            let w = attrs.get("width").and_then(number)?;
            let h = attrs.get("height").and_then(number)?;
            (w >= 1.0 && h >= 1.0).then_some((w as u32, h as u32))
        });
        entries.push(ViaEntry {
            filename,
            dims,
            regions,
            skipped_shapes,
        });
    }
    Ok(ViaProject { entries })
}

fn fill_rect(mask: &mut [u8], dims: (u32, u32), x: f64, y: f64, w: f64, h: f64) {
    let (fw, fh) = dims;
    // Pixel centers i + 0.5 in [x, x + w).
    let x_start = (x - 0.5).ceil().max(0.0) as i64;
    let x_end = (x + w - 0.5).ceil().min(fw as f64) as i64;
    let y_start = (y - 0.5).ceil().max(0.0) as i64;
    let y_end = (y + h - 0.5).ceil().min(fh as f64) as i64;
    for j in y_start..y_end {
        for i in x_start..x_end {
            mask[j as usize * fw as usize + i as usize] = 1;
        }
    }
}

fn fill_polygon(mask: &mut [u8], dims: (u32, u32), points: &[(f64, f64)]) {
    let (fw, fh) = dims;
    if points.len() < 3 {
        return;
    }
    let mut crossings: Vec<f64> = Vec::new();
    for j in 0..fh {
        let cy = j as f64 + 0.5;
        crossings.clear();
        for (k, &(xa, ya)) in points.iter().enumerate() {
            let (xb, yb) = points[(k + 1) % points.len()];
            // Half-open in y so shared vertices count exactly once.
            if (ya <= cy && cy < yb) || (yb <= cy && cy < ya) {
                crossings.push(xa + (cy - ya) / (yb - ya) * (xb - xa));
            }
        }
        crossings.sort_by(|a, b| a.partial_cmp(b).expect("finite crossing"));
        for pair in crossings.chunks_exact(2) {
            let i_start = (pair[0] - 0.5).ceil().max(0.0) as i64;
            let i_end = (pair[1] - 0.5).ceil().min(fw as f64) as i64;
            for i in i_start..i_end {
                mask[j as usize * fw as usize + i as usize] = 1;
            }
        }
    }
}

/// Rasterizes the union of regions onto a `dims` frame. Coverage outside the
/// frame is clipped; degenerate polygons contribute nothing.
pub fn rasterize(regions: &[ViaRegion], dims: (u32, u32)) -> Result<BinaryMask> {
    let (w, h) = dims;
    if w == 0 || h == 0 {
        return Err(Error::InvalidArgument(format!(
            "raster dimensions must be positive, got {w}x{h}"
        )));
    }
    let mut data = vec![0u8; w as usize * h as usize];
    for region in regions {
        match region {
            ViaRegion::Rect {
                x,
                y,
                width,
                height,
            } => fill_rect(&mut data, dims, *x, *y, *width, *height),
            ViaRegion::Polygon { points } => fill_polygon(&mut data, dims, points),
        }
    }
    BinaryMask::new(w, h, data)
}

/// Outcome of a batch mask export.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MaskSummary {
    pub masks_written: usize,
    pub empty_masks: usize,
    pub skipped_shapes: usize,
    /// `(filename, reason)` for entries that could not be processed.
    pub failures: Vec<(String, String)>,
}

/// Rasterizes every project entry and writes one mask PNG per image into
/// `out_dir`, named after the image with a `.png` extension.
///
/// Dimensions come from `dims_lookup` first, then from dims embedded in the
/// entry. Entries with unresolvable dimensions or failing I/O are recorded
/// and processing continues. Images with zero regions still produce an
/// all-background mask.
pub fn project_to_masks(
    project: &ViaProject,
    dims_lookup: impl Fn(&str) -> Option<(u32, u32)>,
    out_dir: impl AsRef<Path>,
) -> Result<MaskSummary> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summary = MaskSummary {
        skipped_shapes: project.total_skipped_shapes(),
        ..MaskSummary::default()
    };
    for entry in &project.entries {
        let dims = match dims_lookup(&entry.filename).or(entry.dims) {
            Some(dims) => dims,
            None => {
                summary
                    .failures
                    .push((entry.filename.clone(), "unresolvable dimensions".to_string()));
                continue;
            }
        };
        let mask = match rasterize(&entry.regions, dims) {
            Ok(mask) => mask,
            Err(e) => {
                summary.failures.push((entry.filename.clone(), e.to_string()));
                continue;
            }
        };
        let stem = Path::new(&entry.filename)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| entry.filename.clone());
        let path = out_dir.join(format!("{stem}.png"));
        if let Err(e) = save_png(&mask, &path) {
            summary.failures.push((entry.filename.clone(), e.to_string()));
            continue;
        }
        if mask.count_ones() == 0 {
            summary.empty_masks += 1;
        }
        summary.masks_written += 1;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const MINIMAL_RECT: &str = r#"{
        "_via_img_metadata": {
            "img1.png12345": {
                "filename": "img1.png",
                "size": 12345,
                "regions": [
                    {
                        "shape_attributes": {"name": "rect", "x": 0, "y": 0, "width": 2, "height": 2},
                        "region_attributes": {}
                    }
                ],
                "file_attributes": {}
            }
        }
    }"#;

    #[test]
    fn parses_minimal_rect_project() {
        let project = ViaProject::parse(MINIMAL_RECT).unwrap();
        assert_eq!(project.entries.len(), 1);
        let entry = &project.entries[0];
        assert_eq!(entry.filename, "img1.png");
        assert_eq!(
            entry.regions,
            vec![ViaRegion::Rect {
                x: 0.0,
                y: 0.0,
                width: 2.0,
                height: 2.0
            }]
        );
    }

    #[test]
    fn parses_flat_metadata_map() {
        let flat = r#"{
            "a.png1": {"filename": "a.png", "regions": []}
        }"#;
        let project = ViaProject::parse(flat).unwrap();
        assert_eq!(project.entries.len(), 1);
        assert!(project.entries[0].regions.is_empty());
    }

    #[test]
    fn counts_skipped_shapes() {
        let text = r#"{
            "b.png1": {"filename": "b.png", "regions": [
                {"shape_attributes": {"name": "polygon", "all_points_x": [0, 4, 0], "all_points_y": [0, 0, 4]}},
                {"shape_attributes": {"name": "circle", "cx": 2, "cy": 2, "r": 1}}
            ]}
        }"#;
        let project = ViaProject::parse(text).unwrap();
        let entry = &project.entries[0];
        assert_eq!(entry.regions.len(), 1);
        assert_eq!(entry.skipped_shapes.get("circle"), Some(&1));
        assert_eq!(project.total_skipped_shapes(), 1);
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(ViaProject::parse("not json").is_err());
    }

    #[test]
    fn errors_name_the_entry() {
        let text = r#"{
            "c.png1": {"filename": "c.png", "regions": [
                {"shape_attributes": {"name": "rect", "x": 0, "y": 0, "width": 2}}
            ]}
        }"#;
        let err = ViaProject::parse(text).unwrap_err();
        assert!(err.to_string().contains("c.png"), "{err}");
        assert!(err.to_string().contains("height"), "{err}");
    }

    #[test]
    fn rejects_duplicate_filenames() {
        let text = r#"{
            "a1": {"filename": "same.png", "regions": []},
            "a2": {"filename": "same.png", "regions": []}
        }"#;
        let err = ViaProject::parse(text).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn rect_covers_exactly_four_pixels() {
        let regions = vec![ViaRegion::Rect {
            x: 0.0,
            y: 0.0,
            width: 2.0,
            height: 2.0,
        }];
        let mask = rasterize(&regions, (4, 4)).unwrap();
        assert_eq!(mask.count_ones(), 4);
        for (x, y) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
            assert!(mask.get(x, y));
        }
    }

    #[test]
    fn enclosing_polygon_fills_the_frame() {
        let regions = vec![ViaRegion::Polygon {
            points: vec![(-10.0, -10.0), (20.0, -10.0), (20.0, 20.0), (-10.0, 20.0)],
        }];
        let mask = rasterize(&regions, (4, 4)).unwrap();
        assert_eq!(mask.count_ones(), 16);
    }

    /// Even-odd point-in-polygon test at one pixel center: counts edge
    /// crossings strictly to the right of the point.
    fn oracle_inside(points: &[(f64, f64)], cx: f64, cy: f64) -> bool {
        let mut crossings = 0;
        for (k, &(xa, ya)) in points.iter().enumerate() {
            let (xb, yb) = points[(k + 1) % points.len()];
            if (ya <= cy && cy < yb) || (yb <= cy && cy < ya) {
                let x = xa + (cy - ya) / (yb - ya) * (xb - xa);
                if cx < x {
                    crossings += 1;
                }
            }
        }
        crossings % 2 == 1
    }

    fn assert_matches_oracle(points: &[(f64, f64)], dims: (u32, u32)) {
        let mask = rasterize(
            &[ViaRegion::Polygon {
                points: points.to_vec(),
            }],
            dims,
        )
        .unwrap();
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                let expect = oracle_inside(points, x as f64 + 0.5, y as f64 + 0.5);
                assert_eq!(mask.get(x, y), expect, "pixel ({x},{y}) of {points:?}");
            }
        }
    }

    #[test]
    fn triangle_matches_point_in_polygon_oracle() {
        assert_matches_oracle(&[(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)], (4, 4));
    }

    #[test]
    fn degenerate_polygon_fills_nothing() {
        let regions = vec![ViaRegion::Polygon {
            points: vec![(1.0, 1.0), (3.0, 1.0), (2.0, 1.0)],
        }];
        assert_eq!(rasterize(&regions, (4, 4)).unwrap().count_ones(), 0);
    }

    #[test]
    fn reserialization_round_trips() {
        let text = r#"{
            "d.png1": {"filename": "d.png", "regions": [
                {"shape_attributes": {"name": "polygon", "all_points_x": [0.5, 4.25, 1], "all_points_y": [0, 1.75, 4]}},
                {"shape_attributes": {"name": "rect", "x": 1, "y": 2, "width": 3.5, "height": 4}}
            ], "file_attributes": {"width": 8, "height": 6}}
        }"#;
        let project = ViaProject::parse(text).unwrap();
        let back = ViaProject::parse(&project.to_json()).unwrap();
        assert_eq!(project, back);
    }

    #[test]
    fn project_to_masks_writes_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{
            "a.png1": {"filename": "a.png", "regions": [
                {"shape_attributes": {"name": "rect", "x": 0, "y": 0, "width": 2, "height": 2}}
            ]},
            "b.png1": {"filename": "b.png", "regions": []},
            "c.png1": {"filename": "c.png", "regions": [
                {"shape_attributes": {"name": "polygon", "all_points_x": [0, 6, 0], "all_points_y": [0, 0, 6]}},
                {"shape_attributes": {"name": "ellipse", "cx": 1, "cy": 1, "rx": 1, "ry": 2}}
            ]},
            "missing.png1": {"filename": "missing.png", "regions": []}
        }"#;
        let project = ViaProject::parse(text).unwrap();
        let dims = |name: &str| (name != "missing.png").then_some((6u32, 6u32));
        let summary = project_to_masks(&project, dims, dir.path()).unwrap();
        assert_eq!(summary.masks_written, 3);
        assert_eq!(summary.empty_masks, 1);
        assert_eq!(summary.skipped_shapes, 1);
        assert_eq!(summary.failures.len(), 1);
        assert_eq!(summary.failures[0].0, "missing.png");

        let a = crate::png_io::load_png::<f64>(dir.path().join("a.png")).unwrap();
        let set = a.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(set, 4);
        // Triangle with legs of 6: pixel centers below the hypotenuse.
        let c = crate::png_io::load_png::<f64>(dir.path().join("c.png")).unwrap();
        let set = c.data().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(set, 15);
    }

    fn arbitrary_polygon() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-8.0f64..72.0, -8.0f64..72.0), 3..=10)
    }

    proptest! {
        // Scanline fill equals the per-center even-odd oracle.
        #[test]
        fn scanline_matches_oracle(points in arbitrary_polygon()) {
            assert_matches_oracle(&points, (64, 64));
        }

        // Adding a region never unsets a pixel.
        #[test]
        fn union_is_monotone(points in arbitrary_polygon(), x in -4.0f64..60.0, y in -4.0f64..60.0) {
            let base = vec![ViaRegion::Polygon { points: points.clone() }];
            let more = vec![
                ViaRegion::Polygon { points },
                ViaRegion::Rect { x, y, width: 8.0, height: 5.0 },
            ];
            let a = rasterize(&base, (64, 64)).unwrap();
            let b = rasterize(&more, (64, 64)).unwrap();
            for (pa, pb) in a.data().iter().zip(b.data()) {
                prop_assert!(pb >= pa);
            }
        }
    }
}
