//! Segmentation evaluation and the loss/entropy kernels used to study
//! synthetic-to-real transfer.
//!
//! Evaluation accumulates integer confusion counts over the whole dataset
//! and divides once at the end, so reductions are associative and parallel
//! order cannot change the result. IoU for the two classes comes from the
//! aggregate matrix; classes absent from both prediction and ground truth
//! are excluded from the mean rather than rewarded.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, RasterImage};
use crate::scalar::Scalar;

/// Probability clamp for all logarithms.
pub const LOG_EPSILON: f64 = 1e-7;

/// Default adversarial loss weight.
pub const DEFAULT_LAMBDA_ADV: f64 = 0.1;

/// The two segmentation classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegClass {
    Background,
    Smoke,
}

impl SegClass {
    pub const ALL: [SegClass; 2] = [SegClass::Background, SegClass::Smoke];

    pub fn index(self) -> usize {
        match self {
            SegClass::Background => 0,
            SegClass::Smoke => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SegClass::Background => "background",
            SegClass::Smoke => "smoke",
        }
    }
}

/// Pixel confusion counts, stored from the smoke-positive view. Background
/// counts are the same numbers with positives and negatives exchanged.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    /// `(tp, fp, fn, tn)` seen from `class` as the positive label.
    pub fn counts_for(&self, class: SegClass) -> (u64, u64, u64, u64) {
        match class {
            SegClass::Smoke => (self.true_pos, self.false_pos, self.false_neg, self.true_neg),
            SegClass::Background => (self.true_neg, self.false_neg, self.false_pos, self.true_pos),
        }
    }

    /// Intersection over union `tp / (tp + fp + fn)`, or `None` when the
    /// class is absent from both prediction and ground truth.
    pub fn iou(&self, class: SegClass) -> Option<f64> {
        let (tp, fp, fneg, _) = self.counts_for(class);
        let denom = tp + fp + fneg;
        (denom > 0).then(|| tp as f64 / denom as f64)
    }

    /// Ground-truth pixel count of `class`.
    pub fn gt_pixels(&self, class: SegClass) -> u64 {
        let (tp, _, fneg, _) = self.counts_for(class);
        tp + fneg
    }
}

/// Per-pixel confusion tally between a predicted and a ground-truth mask.
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionMatrix> {
    if pred.dims() != gt.dims() {
        return Err(Error::dims("confusion pred vs gt", pred.dims(), gt.dims()));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, g) in pred.data().iter().zip(gt.data()) {
        match (p, g) {
            (1, 1) => cm.true_pos += 1,
            (1, 0) => cm.false_pos += 1,
            (0, 1) => cm.false_neg += 1,
            _ => cm.true_neg += 1,
        }
    }
    Ok(cm)
}

/// Aggregate IoU of one image pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerImageIou {
    pub name: String,
    /// `[background, smoke]`, `None` where the class is absent from both.
    pub class_iou: [Option<f64>; 2],
}

/// Dataset-level evaluation summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Run or model label used in the report table.
    pub model: String,
    pub images: usize,
    /// Mean IoU over defined classes, in percent.
    pub miou_percent: f64,
    /// Aggregate per-class IoU as fractions.
    pub class_iou: [Option<f64>; 2],
    /// Ground-truth pixels per class over the whole dataset.
    pub class_pixel_totals: [u64; 2],
    pub aggregate: ConfusionMatrix,
    pub per_image: Vec<PerImageIou>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable report")
    }

    /// One table row: run name column and mIoU column, two decimals.
    pub fn table_row(&self) -> String {
        format!("{:<32} {:>8.2}", self.model, self.miou_percent)
    }
}

/// Formats reports as a plain-text table with a model column and an mIoU
/// column.
pub fn text_table<'a>(reports: impl IntoIterator<Item = &'a EvalReport>) -> String {
    let mut out = format!("{:<32} {:>8}\n", "Model", "mIoU");
    for report in reports {
        out.push_str(&report.table_row());
        out.push('\n');
    }
    out
}

/// Streaming mean-IoU accumulator; pairs may be added in any order.
#[derive(Clone, Debug, Default)]
pub struct MeanIouAccumulator {
    aggregate: ConfusionMatrix,
    per_image: Vec<PerImageIou>,
}

impl MeanIouAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, pred: &BinaryMask, gt: &BinaryMask) -> Result<()> {
        let cm = confusion(pred, gt)?;
        self.aggregate.merge(&cm);
        self.per_image.push(PerImageIou {
            name: name.into(),
            class_iou: [cm.iou(SegClass::Background), cm.iou(SegClass::Smoke)],
        });
        Ok(())
    }

    pub fn finish(self, model: impl Into<String>) -> Result<EvalReport> {
        if self.per_image.is_empty() {
            return Err(Error::EmptyInput("no image pairs to evaluate"));
        }
        let class_iou = [
            self.aggregate.iou(SegClass::Background),
            self.aggregate.iou(SegClass::Smoke),
        ];
        let defined: Vec<f64> = class_iou.iter().flatten().copied().collect();
        let miou_percent = 100.0 * defined.iter().sum::<f64>() / defined.len() as f64;
        Ok(EvalReport {
            model: model.into(),
            images: self.per_image.len(),
            miou_percent,
            class_iou,
            class_pixel_totals: [
                self.aggregate.gt_pixels(SegClass::Background),
                self.aggregate.gt_pixels(SegClass::Smoke),
            ],
            aggregate: self.aggregate,
            per_image: self.per_image,
        })
    }
}

/// Dataset mean IoU over `(pred, gt)` pairs.
pub fn mean_iou<'a>(
    pairs: impl IntoIterator<Item = (&'a BinaryMask, &'a BinaryMask)>,
) -> Result<EvalReport> {
    let mut acc = MeanIouAccumulator::new();
    for (index, (pred, gt)) in pairs.into_iter().enumerate() {
        acc.add(format!("pair_{index:04}"), pred, gt)?;
    }
    acc.finish("run")
}

/// Per-pixel class distribution over `classes` categories.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap<S: Scalar> {
    width: u32,
    height: u32,
    classes: usize,
    data: Vec<S>,
}

impl<S: Scalar> ProbabilityMap<S> {
    /// Tolerance on each pixel's probability sum.
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(width: u32, height: u32, classes: usize, data: Vec<S>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "probability map needs at least 2 classes, got {classes}"
            )));
        }
        let pixels = width as usize * height as usize;
        if pixels == 0 || data.len() != pixels * classes {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {width}x{height}x{classes}",
                data.len()
            )));
        }
        let tol = S::from_f64_lossy(Self::SUM_TOLERANCE);
        for px in data.chunks_exact(classes) {
            let mut sum = S::zero();
            for &p in px {
                if p < S::zero() {
                    return Err(Error::InvalidArgument(format!(
                        "probability {p} is negative"
                    )));
                }
                sum = sum + p;
            }
            if (sum - S::one()).abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "pixel distribution sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            classes,
            data,
        })
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        classes: usize,
        mut f: impl FnMut(u32, u32, usize) -> S,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize * classes);
        for y in 0..height {
            for x in 0..width {
                for c in 0..classes {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, classes, data)
    }

    /// Constant two-class map with smoke probability `p_smoke`.
    pub fn binary_constant(width: u32, height: u32, p_smoke: S) -> Result<Self> {
        Self::from_fn(width, height, 2, |_, _, c| {
            if c == 1 {
                p_smoke
            } else {
                S::one() - p_smoke
            }
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

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, class: usize) -> S {
        debug_assert!(x < self.width && y < self.height && class < self.classes);
        self.data[(y as usize * self.width as usize + x as usize) * self.classes + class]
    }
}

/// Per-pixel Shannon entropy normalized by `ln C`, so values span `[0, 1]`
/// with the uniform distribution at 1 and any one-hot pixel at 0. The
/// `0 ln 0 = 0` convention applies.
pub fn entropy_map<S: Scalar>(probs: &ProbabilityMap<S>) -> RasterImage<S> {
    let ln_c = S::from_f64_lossy((probs.classes() as f64).ln());
    RasterImage::from_fn(probs.width(), probs.height(), 1, |x, y, _| {
        let mut sum = S::zero();
        for c in 0..probs.classes() {
            let p = probs.get(x, y, c);
            if p > S::zero() {
                sum = sum + p * p.ln();
            }
        }
        -sum / ln_c
    })
}

#[inline]
fn clamped_ln<S: Scalar>(p: S) -> S {
    let eps = S::from_f64_lossy(LOG_EPSILON);
    let hi = S::one() - eps;
    p.max(eps).min(hi).ln()
}

/// Mean segmentation cross-entropy of a two-class probability map against a
/// ground-truth mask: `-ln p(true class)` averaged over pixels, with
/// probabilities clamped to `[eps, 1 - eps]`.
pub fn pixel_cross_entropy<S: Scalar>(probs: &ProbabilityMap<S>, gt: &BinaryMask) -> Result<S> {
    if probs.classes() != 2 {
        return Err(Error::InvalidArgument(format!(
            "cross-entropy expects a 2-class map, got {}",
            probs.classes()
        )));
    }
    if probs.dims() != gt.dims() {
        return Err(Error::dims("cross-entropy probs vs gt", probs.dims(), gt.dims()));
    }
    let mut sum = S::zero();
    for y in 0..probs.height() {
        for x in 0..probs.width() {
            let class = gt.get(x, y) as usize;
            sum = sum - clamped_ln(probs.get(x, y, class));
        }
    }
    Ok(sum / S::from_f64_lossy(probs.width() as f64 * probs.height() as f64))
}

/// Mean binary cross-entropy of a per-pixel probability-of-real map against
/// a constant domain label.
pub fn pixel_bce<S: Scalar>(pred: &RasterImage<S>, target_real: bool) -> Result<S> {
    if pred.channels() != 1 {
        return Err(Error::InvalidArgument(
            "discriminator map must be single-channel".to_string(),
        ));
    }
    let mut sum = S::zero();
    for &p in pred.data() {
        sum = sum
            - if target_real {
                clamped_ln(p)
            } else {
                clamped_ln(S::one() - p)
            };
    }
    Ok(sum / S::from_f64_lossy(pred.data().len() as f64))
}

/// Weights for combining segmentation and adversarial losses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialWeights {
    /// Weight broadcast over every adversarial term.
    pub lambda_adv: f64,
    /// Per-level weights for multi-level outputs; overrides the broadcast.
    pub per_level: Option<Vec<f64>>,
}

impl Default for AdversarialWeights {
    fn default() -> Self {
        Self {
            lambda_adv: DEFAULT_LAMBDA_ADV,
            per_level: None,
        }
    }
}

impl AdversarialWeights {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_adv < 0.0
            || self
                .per_level
                .as_ref()
                .is_some_and(|w| w.iter().any(|&l| l < 0.0))
        {
            return Err(Error::InvalidArgument(
                "adversarial weights must be non-negative".to_string(),
            ));
        }
        Ok(())
    }
}

/// Combined training objective: `seg_loss + sum_i lambda_i * adv_loss_i`.
pub fn adversarial_objective<S: Scalar>(
    seg_loss: S,
    adv_losses: &[S],
    weights: &AdversarialWeights,
) -> Result<S> {
    weights.validate()?;
    let lambdas: Vec<f64> = match &weights.per_level {
        Some(levels) => {
            if levels.len() != adv_losses.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} per-level weights for {} adversarial losses",
                    levels.len(),
                    adv_losses.len()
                )));
            }
            levels.clone()
        }
        None => vec![weights.lambda_adv; adv_losses.len()],
    };
    let mut total = seg_loss;
    for (&loss, lambda) in adv_losses.iter().zip(lambdas) {
        total = total + S::from_f64_lossy(lambda) * loss;
    }
    Ok(total)
}

/// A stack of `channels` feature maps stored as planar `[c][y][x]` data.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack<S: Scalar> {
    channels: usize,
    width: u32,
    height: u32,
    data: Vec<S>,
}

impl<S: Scalar> FeatureStack<S> {
    pub fn new(channels: usize, width: u32, height: u32, data: Vec<S>) -> Result<Self> {
        if channels == 0 || width == 0 || height == 0 {
            return Err(Error::InvalidArgument(
                "feature stack dimensions must be positive".to_string(),
            ));
        }
        if data.len() != channels * width as usize * height as usize {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match {channels}x{height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            width,
            height,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        width: u32,
        height: u32,
        mut f: impl FnMut(usize, u32, u32) -> S,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * width as usize * height as usize);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, x, y));
                }
            }
        }
        Self {
            channels,
            width,
            height,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, c: usize, x: u32, y: u32) -> S {
        self.data[(c * self.height as usize + y as usize) * self.width as usize + x as usize]
    }

    fn plane(&self, c: usize) -> &[S] {
        let len = self.width as usize * self.height as usize;
        &self.data[c * len..(c + 1) * len]
    }
}

/// Channel co-occurrence (Gram) matrix, row-major `channels x channels`.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix<S: Scalar> {
    size: usize,
    data: Vec<S>,
}

impl<S: Scalar> GramMatrix<S> {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> S {
        self.data[i * self.size + j]
    }
}

/// `G[i][j] = sum_xy F_i * F_j / (H * W)`, with features zeroed outside the
/// mask when one is given. The upper triangle is mirrored, so the output is
/// symmetric by construction.
pub fn gram_matrix<S: Scalar>(
    features: &FeatureStack<S>,
    mask: Option<&BinaryMask>,
) -> Result<GramMatrix<S>> {
    if let Some(mask) = mask {
        if mask.dims() != features.dims() {
            return Err(Error::dims("gram mask vs features", mask.dims(), features.dims()));
        }
    }
    let c = features.channels();
    let norm = S::from_f64_lossy(features.width as f64 * features.height as f64);
    let mut data = vec![S::zero(); c * c];
    for i in 0..c {
        for j in i..c {
            let mut sum = S::zero();
            match mask {
                None => {
                    for (a, b) in features.plane(i).iter().zip(features.plane(j)) {
                        sum = sum + *a * *b;
                    }
                }
                Some(mask) => {
                    for ((a, b), m) in features
                        .plane(i)
                        .iter()
                        .zip(features.plane(j))
                        .zip(mask.data())
                    {
                        if *m == 1 {
                            sum = sum + *a * *b;
                        }
                    }
                }
            }
            let g = sum / norm;
            data[i * c + j] = g;
            data[j * c + i] = g;
        }
    }
    Ok(GramMatrix { size: c, data })
}

/// Style and content losses between generated features and their style /
/// content references, restricted to `mask` when given.
///
/// Style is the mean squared difference of the masked Gram matrices;
/// content is the mean squared difference of the masked feature maps. All
/// three stacks must share the same shape.
pub fn style_content_losses<S: Scalar>(
    gen_features: &FeatureStack<S>,
    style_features: &FeatureStack<S>,
    content_features: &FeatureStack<S>,
    mask: Option<&BinaryMask>,
) -> Result<(S, S)> {
    for (other, context) in [
        (style_features, "gen vs style features"),
        (content_features, "gen vs content features"),
    ] {
        if other.channels() != gen_features.channels() || other.dims() != gen_features.dims() {
            return Err(Error::dims(context, gen_features.dims(), other.dims()));
        }
    }

    let gram_gen = gram_matrix(gen_features, mask)?;
    let gram_style = gram_matrix(style_features, mask)?;
    let c = gen_features.channels();
    let mut style_loss = S::zero();
    for (a, b) in gram_gen.data.iter().zip(&gram_style.data) {
        let d = *a - *b;
        style_loss = style_loss + d * d;
    }
    style_loss = style_loss / S::from_f64_lossy((c * c) as f64);

    let mut content_loss = S::zero();
    let masked = |stack: &FeatureStack<S>, idx: usize, m: u8| {
        if m == 1 {
            stack.data[idx]
        } else {
            S::zero()
        }
    };
    let plane_len = gen_features.width as usize * gen_features.height as usize;
    for idx in 0..gen_features.data.len() {
        let m = mask.map_or(1, |mask| mask.data()[idx % plane_len]);
        let d = masked(gen_features, idx, m) - masked(content_features, idx, m);
        content_loss = content_loss + d * d;
    }
    content_loss = content_loss / S::from_f64_lossy(gen_features.data.len() as f64);

    Ok((style_loss, content_loss))
}

/// Deterministic seeded split of `ids` into train and eval partitions.
///
/// A Fisher-Yates shuffle driven by ChaCha8 orders the ids; the first
/// `floor(fraction * N)` become the training set.
pub fn split_dataset<T: Clone>(ids: &[T], fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    use rand_core::{RngCore, SeedableRng};

    if ids.is_empty() {
        return Err(Error::EmptyInput("no ids to split"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut shuffled: Vec<T> = ids.to_vec();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for i in (1..shuffled.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        shuffled.swap(i, j);
    }
    let train_len = (fraction * ids.len() as f64).floor() as usize;
    let eval = shuffled.split_off(train_len);
    Ok((shuffled, eval))
}
