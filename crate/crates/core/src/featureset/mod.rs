//! Per-pixel feature assembly: the 28 grey-level planes in a fixed order,
//! the two connectivity flags, and labeled training tables.

mod csv;

pub use csv::{read_csv, write_csv};

use rayon::prelude::*;

use crate::connectivity::{connectivity_at, disc_offsets};
use crate::error::{Error, Result};
use crate::filters;
use crate::imaging::{BinaryMask, DatasetEntry, GrayImage, Plane};
use crate::rng::{self, SplitMix64};

/// Total per-pixel feature count: 28 grey-level planes + 2 connectivity
/// flags.
pub const FEATURE_COUNT: usize = 30;
/// The precomputable grey-level portion of the vector.
pub const GREY_FEATURE_COUNT: usize = 28;
/// Index of the immediate-connectivity flag.
pub const CONN_IMMEDIATE: usize = 28;
/// Index of the radial-connectivity flag.
pub const CONN_RADIAL: usize = 29;
/// Radius of the radial connectivity disc.
pub const RADIAL_RADIUS: usize = 7;

/// Canonical feature order. Grey-level planes first, connectivity flags
/// last; the CSV schema appends `label,image_id,x,y`.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "hess_det",
    "hess_a",
    "hess_b",
    "hess_c",
    "hess_d",
    "hess_l1",
    "hess_l2",
    "hess_gamma",
    "hess_mod",
    "hess_tr",
    "win_mean",
    "win_max",
    "win_min",
    "win_med",
    "aniso_1",
    "aniso_2",
    "aniso_3",
    "aniso_4",
    "morph_1",
    "morph_2",
    "morph_3",
    "morph_4",
    "morph_5",
    "morph_6",
    "kuw_11",
    "kuw_21",
    "lsobel_d2",
    "lsobel_d5",
    "conn_imm",
    "conn_rad",
];

/// One pixel's feature values in [`FEATURE_NAMES`] order.
pub type FeatureVector = [f64; FEATURE_COUNT];

/// The 28 grey-level feature planes of one image.
pub struct FeatureStack {
    pub source_id: String,
    width: usize,
    height: usize,
    planes: Vec<Plane>,
}

impl FeatureStack {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn planes(&self) -> &[Plane] {
        &self.planes
    }

    pub fn plane(&self, index: usize) -> &Plane {
        &self.planes[index]
    }

    /// Plane lookup by feature name (grey-level features only).
    pub fn plane_by_name(&self, name: &str) -> Option<&Plane> {
        FEATURE_NAMES[..GREY_FEATURE_COUNT]
            .iter()
            .position(|&n| n == name)
            .map(|i| &self.planes[i])
    }

    /// Write the 28 grey-level values for pixel (x, y) into `out[..28]`.
    #[inline]
    pub fn fill_grey(&self, x: usize, y: usize, out: &mut FeatureVector) {
        let idx = y * self.width + x;
        for (k, plane) in self.planes.iter().enumerate() {
            out[k] = plane.data()[idx];
        }
    }

    /// Full vector with the given connectivity flags.
    pub fn vector_at(&self, x: usize, y: usize, immediate: bool, radial: bool) -> FeatureVector {
        let mut v = [0.0; FEATURE_COUNT];
        self.fill_grey(x, y, &mut v);
        v[CONN_IMMEDIATE] = immediate as u8 as f64;
        v[CONN_RADIAL] = radial as u8 as f64;
        v
    }
}

/// Run the whole filter bank with the fixed feature configurations and stack
/// the 28 planes in canonical order.
pub fn extract_stack(img: &GrayImage) -> Result<FeatureStack> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!(
            "feature extraction needs at least 3x3, got {w}x{h}"
        )));
    }

    let mut planes: Vec<Plane> = Vec::with_capacity(GREY_FEATURE_COUNT);

    planes.extend(filters::hessian_planes(img)?.planes);

    let [mean, max, min, median] = filters::window_stats(img, 7)?;
    planes.extend([mean, max, min, median]);

    for p in &filters::DIFFUSION_CONFIGS {
        planes.push(filters::anisotropic_diffusion(img, p)?.to_plane());
    }

    for (se, dilations, erosions) in filters::morph_configs() {
        planes.push(filters::morph_feature(img, &se, dilations, erosions)?.to_plane());
    }

    for a in filters::KUWAHARA_CONFIGS {
        planes.push(filters::kuwahara(img, a)?.to_plane());
    }

    for (t, d) in filters::LIGHT_SOBEL_CONFIGS {
        planes.push(filters::light_sobel(img, t, d)?);
    }

    debug_assert_eq!(planes.len(), GREY_FEATURE_COUNT);
    Ok(FeatureStack {
        source_id: String::new(),
        width: w,
        height: h,
        planes,
    })
}

/// Ground-truth connectivity at (x, y): immediate = any vessel among the 8
/// neighbors, radial = any vessel within Euclidean distance 7. The center
/// pixel is always excluded so the flag never leaks the pixel's own label.
pub fn truth_connectivity(truth: &BinaryMask, x: usize, y: usize) -> Result<(bool, bool)> {
    if x >= truth.width() || y >= truth.height() {
        return Err(Error::Bounds {
            x: x as i64,
            y: y as i64,
            width: truth.width(),
            height: truth.height(),
        });
    }
    let disc = disc_offsets(RADIAL_RADIUS);
    Ok(connectivity_at(
        truth.width(),
        truth.height(),
        x,
        y,
        &disc,
        |px, py| truth.get(px, py),
    ))
}

/// One labeled pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRow {
    pub features: FeatureVector,
    pub label: bool,
    pub image_id: String,
    pub x: u32,
    pub y: u32,
}

/// Flat training table.
#[derive(Debug, Clone, Default)]
pub struct LabeledDataset {
    pub rows: Vec<LabeledRow>,
    pub feature_names: Vec<String>,
}

impl LabeledDataset {
    pub fn new() -> Self {
        LabeledDataset {
            rows: Vec::new(),
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend_from(&mut self, other: &LabeledDataset) {
        self.rows.extend(other.rows.iter().cloned());
    }

    /// Copy with the connectivity columns forced to zero, for ablation runs.
    pub fn with_zeroed_connectivity(&self) -> LabeledDataset {
        let mut out = self.clone();
        for row in &mut out.rows {
            row.features[CONN_IMMEDIATE] = 0.0;
            row.features[CONN_RADIAL] = 0.0;
        }
        out
    }

    /// Copy extended with zero-connectivity duplicates of a seeded random
    /// subset of rows. Classification starts from a blank label map where
    /// every query carries zero connectivity; a model trained purely on
    /// truth-derived flags treats a zero flag as near-certain background
    /// and can never produce the high-confidence detections that bootstrap
    /// the region growing. Appending zero-flag copies teaches the model the
    /// grey-only regime without weakening the connectivity signal of the
    /// original rows.
    pub fn with_zero_connectivity_augmentation(&self, fraction: f64, seed: u64) -> LabeledDataset {
        let mut rng = SplitMix64::new(seed);
        let mut out = self.clone();
        for i in 0..self.rows.len() {
            if rng.next_f64() < fraction {
                let mut copy = self.rows[i].clone();
                copy.features[CONN_IMMEDIATE] = 0.0;
                copy.features[CONN_RADIAL] = 0.0;
                out.rows.push(copy);
            }
        }
        out
    }
}

/// Pixel retention policy for training tables.
#[derive(Debug, Clone, Copy)]
pub struct RowSampling {
    /// Retention rate in (0, 1].
    pub rate: f64,
    pub seed: u64,
    /// Equalize vessel/background counts instead of uniform retention.
    pub balanced: bool,
}

impl RowSampling {
    pub fn uniform(rate: f64, seed: u64) -> Self {
        RowSampling {
            rate,
            seed,
            balanced: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::Param(format!(
                "subsample rate must be in (0, 1], got {}",
                self.rate
            )));
        }
        Ok(())
    }
}

/// Raster-order indices retained by uniform subsampling. Pure function of
/// (total, rate, seed): one f64 draw per pixel, kept when below the rate.
pub fn retained_indices(total: usize, rate: f64, seed: u64) -> Vec<usize> {
    if rate >= 1.0 {
        return (0..total).collect();
    }
    let mut rng = SplitMix64::new(seed);
    (0..total).filter(|_| rng.next_f64() < rate).collect()
}

/// Raster-order indices retained by class-balanced subsampling: an equal
/// count from each class, capped by the smaller class and by
/// rate * total / 2.
pub fn retained_indices_balanced(labels: &[bool], rate: f64, seed: u64) -> Vec<usize> {
    let vessel: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let background: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let per_class = (((labels.len() as f64 * rate) / 2.0).round() as usize)
        .min(vessel.len())
        .min(background.len());

    let mut rng = SplitMix64::new(seed);
    let mut keep: Vec<usize> = Vec::with_capacity(per_class * 2);
    for class in [&vessel, &background] {
        let picks = rng.sample_indices(class.len(), per_class);
        keep.extend(picks.into_iter().map(|i| class[i]));
    }
    keep.sort_unstable();
    keep
}

/// Build labeled rows for one image: grey-level values from the stack plus
/// ground-truth-derived connectivity flags, label = truth at the pixel.
/// Rows come out in raster order.
pub fn build_training_rows(
    entry: &DatasetEntry,
    sampling: &RowSampling,
) -> Result<LabeledDataset> {
    let stack = extract_stack(&entry.image)?;
    build_training_rows_with_stack(entry, &stack, sampling)
}

/// Same as [`build_training_rows`] but reusing a precomputed stack.
pub fn build_training_rows_with_stack(
    entry: &DatasetEntry,
    stack: &FeatureStack,
    sampling: &RowSampling,
) -> Result<LabeledDataset> {
    sampling.validate()?;
    let (w, h) = (entry.image.width(), entry.image.height());
    if stack.width() != w || stack.height() != h {
        return Err(Error::Dimension(format!(
            "stack is {}x{} but image is {}x{}",
            stack.width(),
            stack.height(),
            w,
            h
        )));
    }
    if entry.truth.width() != w || entry.truth.height() != h {
        return Err(Error::Dimension(format!(
            "truth is {}x{} but image is {}x{}",
            entry.truth.width(),
            entry.truth.height(),
            w,
            h
        )));
    }

    let seed = rng::substream(sampling.seed, rng::hash_str(&entry.image_id));
    let keep = if sampling.balanced {
        retained_indices_balanced(entry.truth.data(), sampling.rate, seed)
    } else {
        retained_indices(w * h, sampling.rate, seed)
    };

    let disc = disc_offsets(RADIAL_RADIUS);
    let rows: Vec<LabeledRow> = keep
        .par_iter()
        .map(|&idx| {
            let (x, y) = (idx % w, idx / w);
            let (immediate, radial) =
                connectivity_at(w, h, x, y, &disc, |px, py| entry.truth.get(px, py));
            LabeledRow {
                features: stack.vector_at(x, y, immediate, radial),
                label: entry.truth.get(x, y),
                image_id: entry.image_id.clone(),
                x: x as u32,
                y: y as u32,
            }
        })
        .collect();

    Ok(LabeledDataset {
        rows,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_entry(width: usize, height: usize, vessel_at: &[(usize, usize)]) -> DatasetEntry {
        let image = GrayImage::from_fn(width, height, |x, y| ((x * 5 + y * 3) % 200) as f64)
            .unwrap();
        let mut truth = BinaryMask::new(width, height);
        for &(x, y) in vessel_at {
            truth.set(x, y, true);
        }
        DatasetEntry {
            image_id: "t".into(),
            image,
            truth,
        }
    }

    #[test]
    fn stack_has_28_planes_and_matches_dims() {
        let img = GrayImage::from_fn(24, 20, |x, y| ((x + y) % 250) as f64).unwrap();
        let stack = extract_stack(&img).unwrap();
        assert_eq!(stack.planes().len(), GREY_FEATURE_COUNT);
        for p in stack.planes() {
            assert_eq!((p.width(), p.height()), (24, 20));
        }
    }

    #[test]
    fn constant_image_plane_values() {
        let img = GrayImage::from_fn(16, 16, |_, _| 88.0).unwrap();
        let stack = extract_stack(&img).unwrap();
        // Hessian planes vanish.
        for k in 0..10 {
            assert!(stack.plane(k).data().iter().all(|&v| v == 0.0), "plane {k}");
        }
        // Window statistics equal the constant.
        for k in 10..14 {
            assert!(stack.plane(k).data().iter().all(|&v| v == 88.0), "plane {k}");
        }
        // Both directional-difference planes fire everywhere at t = -10.
        for k in 26..28 {
            assert!(stack.plane(k).data().iter().all(|&v| v == 1.0), "plane {k}");
        }
    }

    #[test]
    fn stat_planes_ordered() {
        let mut rng = SplitMix64::new(21);
        let img = GrayImage::from_fn(16, 16, |_, _| rng.next_f64() * 255.0).unwrap();
        let stack = extract_stack(&img).unwrap();
        for i in 0..16 * 16 {
            let mean = stack.plane(10).data()[i];
            let max = stack.plane(11).data()[i];
            let min = stack.plane(12).data()[i];
            assert!(min <= mean && mean <= max);
        }
    }

    #[test]
    fn extraction_is_bit_stable() {
        let mut rng = SplitMix64::new(22);
        let img = GrayImage::from_fn(20, 20, |_, _| rng.next_f64() * 255.0).unwrap();
        let a = extract_stack(&img).unwrap();
        let b = extract_stack(&img).unwrap();
        for k in 0..GREY_FEATURE_COUNT {
            assert_eq!(a.plane(k), b.plane(k), "plane {k}");
        }
    }

    #[test]
    fn connectivity_all_background() {
        let truth = BinaryMask::new(20, 20);
        for y in 0..20 {
            for x in 0..20 {
                assert_eq!(truth_connectivity(&truth, x, y).unwrap(), (false, false));
            }
        }
    }

    #[test]
    fn connectivity_neighbor_and_disc() {
        let mut truth = BinaryMask::new(24, 24);
        truth.set(10, 10, true);
        // 8-neighbor: both flags.
        assert_eq!(truth_connectivity(&truth, 11, 10).unwrap(), (true, true));
        // Distance 5: radial only.
        assert_eq!(truth_connectivity(&truth, 15, 10).unwrap(), (false, true));
        // Distance 8: neither.
        assert_eq!(truth_connectivity(&truth, 18, 10).unwrap(), (false, false));
        // Exactly 7 is inside the disc.
        assert_eq!(truth_connectivity(&truth, 17, 10).unwrap(), (false, true));
    }

    #[test]
    fn connectivity_excludes_self() {
        let mut truth = BinaryMask::new(16, 16);
        truth.set(8, 8, true);
        assert_eq!(truth_connectivity(&truth, 8, 8).unwrap(), (false, false));
    }

    #[test]
    fn immediate_implies_radial_randomized() {
        let mut rng = SplitMix64::new(23);
        for _ in 0..20 {
            let truth = BinaryMask::from_fn(16, 16, |_, _| rng.next_f64() < 0.1);
            for y in 0..16 {
                for x in 0..16 {
                    let (imm, rad) = truth_connectivity(&truth, x, y).unwrap();
                    assert!(!imm || rad);
                    // Brute-force disc check.
                    let mut expect_rad = false;
                    for qy in 0..16i64 {
                        for qx in 0..16i64 {
                            let (dx, dy) = (qx - x as i64, qy - y as i64);
                            if (dx, dy) != (0, 0)
                                && dx * dx + dy * dy <= 49
                                && truth.get(qx as usize, qy as usize)
                            {
                                expect_rad = true;
                            }
                        }
                    }
                    assert_eq!(rad, expect_rad);
                }
            }
        }
    }

    #[test]
    fn connectivity_bounds_checked() {
        let truth = BinaryMask::new(8, 8);
        assert!(matches!(
            truth_connectivity(&truth, 8, 0),
            Err(Error::Bounds { .. })
        ));
    }

    #[test]
    fn full_rate_keeps_every_pixel() {
        let entry = small_entry(16, 16, &[(4, 4)]);
        let ds = build_training_rows(&entry, &RowSampling::uniform(1.0, 1)).unwrap();
        assert_eq!(ds.len(), 256);
        // Raster order.
        assert_eq!((ds.rows[0].x, ds.rows[0].y), (0, 0));
        assert_eq!((ds.rows[255].x, ds.rows[255].y), (15, 15));
    }

    #[test]
    fn all_background_rows() {
        let entry = small_entry(12, 12, &[]);
        let ds = build_training_rows(&entry, &RowSampling::uniform(1.0, 1)).unwrap();
        assert!(ds.rows.iter().all(|r| !r.label));
        assert!(ds
            .rows
            .iter()
            .all(|r| r.features[CONN_IMMEDIATE] == 0.0 && r.features[CONN_RADIAL] == 0.0));
    }

    #[test]
    fn subsample_binomial_bounds_and_determinism() {
        // 512 * 512 pixels at rate 0.1: expect 26214.4 +/- 6 sigma.
        let total = 512 * 512;
        let a = retained_indices(total, 0.1, 99);
        let b = retained_indices(total, 0.1, 99);
        assert_eq!(a, b);
        assert!(a.len() >= 24576 && a.len() <= 27852, "got {}", a.len());
    }

    #[test]
    fn balanced_sampling_equalizes_classes() {
        let labels: Vec<bool> = (0..1000).map(|i| i % 10 == 0).collect(); // 100 vessel
        let keep = retained_indices_balanced(&labels, 0.5, 7);
        let vessel = keep.iter().filter(|&&i| labels[i]).count();
        let background = keep.len() - vessel;
        assert_eq!(vessel, background);
        assert_eq!(vessel, 100); // capped by the smaller class
        let mut sorted = keep.clone();
        sorted.sort_unstable();
        assert_eq!(keep, sorted);
    }

    #[test]
    fn invalid_rate_rejected() {
        let entry = small_entry(8, 8, &[]);
        for rate in [0.0, -0.5, 1.5] {
            assert!(matches!(
                build_training_rows(&entry, &RowSampling::uniform(rate, 1)),
                Err(Error::Param(_))
            ));
        }
    }

    #[test]
    fn zero_connectivity_augmentation_appends_copies() {
        let entry = small_entry(10, 10, &[(5, 5), (5, 6)]);
        let ds = build_training_rows(&entry, &RowSampling::uniform(1.0, 1)).unwrap();
        let augmented = ds.with_zero_connectivity_augmentation(0.5, 9);
        assert!(augmented.len() > ds.len());
        assert!(augmented.len() < 2 * ds.len());
        // Original rows intact, appended rows have zero flags.
        assert_eq!(augmented.rows[..ds.len()], ds.rows[..]);
        for row in &augmented.rows[ds.len()..] {
            assert_eq!(row.features[CONN_IMMEDIATE], 0.0);
            assert_eq!(row.features[CONN_RADIAL], 0.0);
        }
        // Deterministic.
        let again = ds.with_zero_connectivity_augmentation(0.5, 9);
        assert_eq!(again.rows, augmented.rows);
    }

    #[test]
    fn zeroed_connectivity_copy() {
        let entry = small_entry(10, 10, &[(5, 5), (5, 6)]);
        let ds = build_training_rows(&entry, &RowSampling::uniform(1.0, 1)).unwrap();
        assert!(ds.rows.iter().any(|r| r.features[CONN_IMMEDIATE] == 1.0));
        let zeroed = ds.with_zeroed_connectivity();
        assert!(zeroed
            .rows
            .iter()
            .all(|r| r.features[CONN_IMMEDIATE] == 0.0 && r.features[CONN_RADIAL] == 0.0));
        // Labels and grey features untouched.
        assert_eq!(zeroed.rows[0].features[..28], ds.rows[0].features[..28]);
    }
}
