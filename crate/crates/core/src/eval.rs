//! Confusion metrics, ROC/AUC, and the leave-one-image-out experiment.

use serde::Serialize;

use crate::element::{segment_stack, ElementParams, SegmentStats, Segmentation};
use crate::error::{Error, Result};
use crate::featureset::{
    build_training_rows_with_stack, extract_stack, FeatureStack, LabeledDataset, RowSampling,
};
use crate::forest::{train, ConnectivityAblated, ForestModel, ForestParams};
use crate::imaging::{BinaryMask, DatasetEntry};

/// Pixel counts with vessel as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Confusion {
    pub true_pos: u64,
    pub true_neg: u64,
    pub false_pos: u64,
    pub false_neg: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.true_pos + self.true_neg + self.false_pos + self.false_neg
    }

    pub fn add(&mut self, other: &Confusion) {
        self.true_pos += other.true_pos;
        self.true_neg += other.true_neg;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
    }
}

/// Accuracy and class rates. A rate whose denominator is zero is absent,
/// never coerced to 0 or 1.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Rates {
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
}

/// Count agreement between a predicted mask and ground truth.
pub fn confusion(pred: &BinaryMask, truth: &BinaryMask) -> Result<Confusion> {
    if pred.width() != truth.width() || pred.height() != truth.height() {
        return Err(Error::Dimension(format!(
            "prediction is {}x{} but truth is {}x{}",
            pred.width(),
            pred.height(),
            truth.width(),
            truth.height()
        )));
    }
    let mut c = Confusion::default();
    for (p, t) in pred.data().iter().zip(truth.data()) {
        match (p, t) {
            (true, true) => c.true_pos += 1,
            (false, false) => c.true_neg += 1,
            (true, false) => c.false_pos += 1,
            (false, true) => c.false_neg += 1,
        }
    }
    Ok(c)
}

pub fn rates(c: &Confusion) -> Rates {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    Rates {
        accuracy: ratio(c.true_pos + c.true_neg, c.total()),
        tpr: ratio(c.true_pos, c.true_pos + c.false_neg),
        tnr: ratio(c.true_neg, c.true_neg + c.false_pos),
    }
}

/// Area under the ROC curve by trapezoidal sweep over distinct scores.
/// Ties are handled by the trapezoid over the tie block, which equals
/// pairwise concordance with ties counted 1/2.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut auc = 0.0;
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        // Consume a block of tied scores in one step.
        let score = scores[order[i]];
        let (mut block_tp, mut block_fp) = (0u64, 0u64);
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                block_tp += 1;
            } else {
                block_fp += 1;
            }
            i += 1;
        }
        // Trapezoid from (fp, tp) to (fp + block_fp, tp + block_tp).
        auc += block_fp as f64 * (tp as f64 + tp as f64 + block_tp as f64) / 2.0;
        tp += block_tp;
        fp += block_fp;
    }
    debug_assert_eq!((tp, fp), (positives as u64, negatives as u64));
    Ok(auc / (positives as f64 * negatives as f64))
}

/// Points of the ROC curve as (fpr, tpr), one per distinct score plus the
/// origin, sweeping the threshold downward.
pub fn roc_points(scores: &[f64], labels: &[bool]) -> Result<Vec<(f64, f64)>> {
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_unstable_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / negatives as f64, tp as f64 / positives as f64));
    }
    Ok(points)
}

/// Metrics for one scored mask.
#[derive(Debug, Clone, Serialize)]
pub struct ImageMetrics {
    pub confusion: Confusion,
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub auc: Option<f64>,
}

impl ImageMetrics {
    fn from_parts(c: Confusion, auc: Option<f64>) -> Self {
        let r = rates(&c);
        ImageMetrics {
            confusion: c,
            accuracy: r.accuracy,
            tpr: r.tpr,
            tnr: r.tnr,
            auc,
        }
    }
}

/// Unweighted means of the per-image metrics (images with an undefined
/// value are skipped for that metric).
#[derive(Debug, Clone, Default, Serialize)]
pub struct MeanOfImages {
    pub accuracy: Option<f64>,
    pub tpr: Option<f64>,
    pub tnr: Option<f64>,
    pub auc: Option<f64>,
}

/// Full cross-validation report. `pooled` accumulates every pixel of every
/// fold into one confusion/score set; `mean_of_images` is the per-image
/// average, reported alongside so the aggregation choice stays visible.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub per_image: Vec<(String, ImageMetrics)>,
    pub pooled: ImageMetrics,
    pub mean_of_images: MeanOfImages,
}

impl MetricsReport {
    pub fn summary_line(&self) -> String {
        let fmt_pct = |v: Option<f64>| match v {
            Some(v) => format!("{:.1}", v * 100.0),
            None => "n/a".to_string(),
        };
        let fmt_acc = |v: Option<f64>| match v {
            Some(v) => format!("{:.2}", v * 100.0),
            None => "n/a".to_string(),
        };
        let fmt_auc = |v: Option<f64>| match v {
            Some(v) => format!("{v:.3}"),
            None => "n/a".to_string(),
        };
        format!(
            "TP {}% | TN {}% | Acc {}% | AUC {}",
            fmt_pct(self.pooled.tpr),
            fmt_pct(self.pooled.tnr),
            fmt_acc(self.pooled.accuracy),
            fmt_auc(self.pooled.auc)
        )
    }

    /// Human-readable table, one row per image plus pooled and mean rows.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let fmt = |v: Option<f64>, width: usize| match v {
            Some(v) => format!("{:>width$.4}", v),
            None => format!("{:>width$}", "n/a"),
        };
        out.push_str(&format!(
            "{:<14} {:>9} {:>9} {:>9} {:>9} {:>12} {:>12}\n",
            "image", "accuracy", "tpr", "tnr", "auc", "vessel px", "total px"
        ));
        for (id, m) in &self.per_image {
            out.push_str(&format!(
                "{:<14} {} {} {} {} {:>12} {:>12}\n",
                id,
                fmt(m.accuracy, 9),
                fmt(m.tpr, 9),
                fmt(m.tnr, 9),
                fmt(m.auc, 9),
                m.confusion.true_pos + m.confusion.false_neg,
                m.confusion.total()
            ));
        }
        let m = &self.pooled;
        out.push_str(&format!(
            "{:<14} {} {} {} {} {:>12} {:>12}\n",
            "pooled",
            fmt(m.accuracy, 9),
            fmt(m.tpr, 9),
            fmt(m.tnr, 9),
            fmt(m.auc, 9),
            m.confusion.true_pos + m.confusion.false_neg,
            m.confusion.total()
        ));
        let mm = &self.mean_of_images;
        out.push_str(&format!(
            "{:<14} {} {} {} {}\n",
            "mean/image",
            fmt(mm.accuracy, 9),
            fmt(mm.tpr, 9),
            fmt(mm.tnr, 9),
            fmt(mm.auc, 9),
        ));
        out
    }
}

/// Fraction of training rows duplicated with zeroed connectivity flags so
/// the model learns the blank-state regime the seeding phase queries it in.
/// Duplicating every row keeps the grey-only view of the data at full
/// strength alongside the connectivity-aware view.
pub const ZERO_CONNECTIVITY_AUGMENTATION: f64 = 1.0;

/// Cross-validation switches beyond the forest/element parameter bundles.
#[derive(Debug, Clone, Copy)]
pub struct LoioOptions {
    /// Training-pixel retention rate per image.
    pub subsample: f64,
    /// Class-balanced subsampling instead of uniform.
    pub balanced: bool,
    /// Zero the connectivity features at training and inference.
    pub ablate_connectivity: bool,
    /// Fraction of training rows duplicated with zeroed connectivity; see
    /// [`LabeledDataset::with_zero_connectivity_augmentation`].
    pub zero_connectivity_augmentation: f64,
}

impl Default for LoioOptions {
    fn default() -> Self {
        LoioOptions {
            subsample: 0.1,
            balanced: false,
            ablate_connectivity: false,
            zero_connectivity_augmentation: ZERO_CONNECTIVITY_AUGMENTATION,
        }
    }
}

/// Everything produced by one fold, passed to the caller's sink before the
/// model is dropped.
pub struct FoldOutput<'a> {
    pub fold_index: usize,
    pub image_id: &'a str,
    pub model: &'a ForestModel,
    pub segmentation: &'a Segmentation,
    pub metrics: &'a ImageMetrics,
}

/// Leave-one-image-out over the whole corpus: for each image, train on the
/// rows of all other images and segment the held-out one. Per-image feature
/// stacks and training rows are computed once and shared across folds.
///
/// `on_fold` runs after each fold completes, in fold order.
pub fn run_leave_one_image_out(
    entries: &[DatasetEntry],
    forest_params: &ForestParams,
    element_params: &ElementParams,
    options: &LoioOptions,
    mut on_fold: impl FnMut(&FoldOutput) -> Result<()>,
) -> Result<(MetricsReport, Vec<(String, SegmentStats)>)> {
    if entries.len() < 2 {
        return Err(Error::Param(format!(
            "leave-one-image-out needs at least 2 images, got {}",
            entries.len()
        )));
    }
    element_params.validate()?;

    let sampling = RowSampling {
        rate: options.subsample,
        seed: forest_params.seed,
        balanced: options.balanced,
    };

    // Stacks and rows are fold-independent; build once.
    let mut stacks: Vec<FeatureStack> = Vec::with_capacity(entries.len());
    let mut row_tables: Vec<LabeledDataset> = Vec::with_capacity(entries.len());
    for entry in entries {
        let mut stack = extract_stack(&entry.image)?;
        stack.source_id = entry.image_id.clone();
        let mut rows = build_training_rows_with_stack(entry, &stack, &sampling)?;
        rows = if options.ablate_connectivity {
            rows.with_zeroed_connectivity()
        } else {
            rows.with_zero_connectivity_augmentation(
                options.zero_connectivity_augmentation,
                crate::rng::substream(
                    forest_params.seed ^ 0x636F_6E6E,
                    crate::rng::hash_str(&entry.image_id),
                ),
            )
        };
        stacks.push(stack);
        row_tables.push(rows);
    }

    let mut per_image: Vec<(String, ImageMetrics)> = Vec::with_capacity(entries.len());
    let mut fold_stats: Vec<(String, SegmentStats)> = Vec::with_capacity(entries.len());
    let mut pooled_confusion = Confusion::default();
    let mut pooled_scores: Vec<f64> = Vec::new();
    let mut pooled_labels: Vec<bool> = Vec::new();

    for (fold_index, held_out) in entries.iter().enumerate() {
        let mut training = LabeledDataset::new();
        for (i, table) in row_tables.iter().enumerate() {
            if i != fold_index {
                training.extend_from(table);
            }
        }

        let model = train(&training, forest_params)?;
        let segmentation = if options.ablate_connectivity {
            segment_stack(
                &stacks[fold_index],
                &ConnectivityAblated(&model),
                element_params,
            )?
        } else {
            segment_stack(&stacks[fold_index], &model, element_params)?
        };

        let c = confusion(&segmentation.mask, &held_out.truth)?;
        let auc = roc_auc(segmentation.proba.data(), held_out.truth.data()).ok();
        let metrics = ImageMetrics::from_parts(c, auc);

        on_fold(&FoldOutput {
            fold_index,
            image_id: &held_out.image_id,
            model: &model,
            segmentation: &segmentation,
            metrics: &metrics,
        })?;

        pooled_confusion.add(&c);
        pooled_scores.extend_from_slice(segmentation.proba.data());
        pooled_labels.extend_from_slice(held_out.truth.data());
        fold_stats.push((held_out.image_id.clone(), segmentation.stats));
        per_image.push((held_out.image_id.clone(), metrics));
    }

    let pooled_auc = roc_auc(&pooled_scores, &pooled_labels).ok();
    let pooled = ImageMetrics::from_parts(pooled_confusion, pooled_auc);

    let mean = |pick: fn(&ImageMetrics) -> Option<f64>| {
        let vals: Vec<f64> = per_image.iter().filter_map(|(_, m)| pick(m)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    };
    let mean_of_images = MeanOfImages {
        accuracy: mean(|m| m.accuracy),
        tpr: mean(|m| m.tpr),
        tnr: mean(|m| m.tnr),
        auc: mean(|m| m.auc),
    };

    Ok((
        MetricsReport {
            per_image,
            pooled,
            mean_of_images,
        },
        fold_stats,
    ))
}

/// [`run_leave_one_image_out`] without a fold sink.
pub fn leave_one_image_out(
    entries: &[DatasetEntry],
    forest_params: &ForestParams,
    element_params: &ElementParams,
    subsample: f64,
) -> Result<MetricsReport> {
    let options = LoioOptions {
        subsample,
        ..LoioOptions::default()
    };
    run_leave_one_image_out(entries, forest_params, element_params, &options, |_| Ok(()))
        .map(|(report, _)| report)
}
