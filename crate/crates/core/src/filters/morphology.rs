//! Grey-level dilation and erosion with flat structuring elements.
//!
//! The structuring elements mark support only (no additive grey term).
//! Dilation takes the max over the support translated onto the pixel;
//! erosion takes the min over the negated support, which coincides with the
//! plain support for the symmetric elements used here.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

/// Flat structuring element given by its offset support. (0, 0) is always a
/// member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    offsets: Vec<(i32, i32)>,
    name: String,
}

impl StructuringElement {
    pub fn new(name: impl Into<String>, mut offsets: Vec<(i32, i32)>) -> Self {
        if !offsets.contains(&(0, 0)) {
            offsets.push((0, 0));
        }
        offsets.sort_unstable();
        offsets.dedup();
        StructuringElement {
            offsets,
            name: name.into(),
        }
    }

    /// The 3x3 plus sign: center plus the four 4-neighbors.
    pub fn b1() -> Self {
        Self::new("B1", vec![(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)])
    }

    /// Disc of radius 5 on an 11x11 grid (origin-symmetric realization of a
    /// circle drawn on an even-sized canvas).
    pub fn b2() -> Self {
        let mut offsets = Vec::new();
        for dy in -5i32..=5 {
            for dx in -5i32..=5 {
                if dx * dx + dy * dy <= 25 {
                    offsets.push((dx, dy));
                }
            }
        }
        Self::new("B2", offsets)
    }

    pub fn offsets(&self) -> &[(i32, i32)] {
        &self.offsets
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_symmetric(&self) -> bool {
        self.offsets
            .iter()
            .all(|&(dx, dy)| self.offsets.contains(&(-dx, -dy)))
    }
}

fn morph_scan(img: &GrayImage, offsets: &[(i32, i32)], take_max: bool) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    let mut data = vec![0.0f64; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut best = if take_max {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            };
            for &(dx, dy) in offsets {
                let v = img.sample_reflected(x as i64 + dx as i64, y as i64 + dy as i64);
                best = if take_max { best.max(v) } else { best.min(v) };
            }
            *out = best;
        }
    });
    GrayImage::from_data(w, h, data).expect("morphology preserves range")
}

/// Grey-level dilation: per-pixel max over the element's support.
pub fn gray_dilate(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    morph_scan(img, se.offsets(), true)
}

/// Grey-level erosion: per-pixel min over the negated support.
pub fn gray_erode(img: &GrayImage, se: &StructuringElement) -> GrayImage {
    let negated: Vec<(i32, i32)> = se.offsets().iter().map(|&(dx, dy)| (-dx, -dy)).collect();
    morph_scan(img, &negated, false)
}

/// `dilations` dilations followed by `erosions` erosions.
pub fn morph_feature(
    img: &GrayImage,
    se: &StructuringElement,
    dilations: u32,
    erosions: u32,
) -> Result<GrayImage> {
    if dilations + erosions == 0 {
        return Err(Error::Param(
            "morphology feature needs at least one dilation or erosion".into(),
        ));
    }
    let mut out = img.clone();
    for _ in 0..dilations {
        out = gray_dilate(&out, se);
    }
    for _ in 0..erosions {
        out = gray_erode(&out, se);
    }
    Ok(out)
}

/// The six (element, dilations, erosions) feature configurations, in feature
/// order.
pub fn morph_configs() -> [(StructuringElement, u32, u32); 6] {
    let b1 = StructuringElement::b1();
    let b2 = StructuringElement::b2();
    [
        (b1.clone(), 1, 1),
        (b1.clone(), 1, 3),
        (b1, 3, 1),
        (b2.clone(), 1, 1),
        (b2.clone(), 1, 3),
        (b2, 3, 1),
    ]
}

/// Pointwise 255 - v, used by the duality tests.
pub fn invert(img: &GrayImage) -> GrayImage {
    let data = img.data().iter().map(|&v| 255.0 - v).collect();
    GrayImage::from_data(img.width(), img.height(), data).expect("inversion preserves range")
}
