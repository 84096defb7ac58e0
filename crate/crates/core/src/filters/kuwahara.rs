//! Kuwahara smoothing: each pixel takes the mean of the most homogeneous of
//! the four overlapping (a+1) x (a+1) quadrants around it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::GrayImage;

// Quadrant x/y spans relative to the pixel, in tie-break priority order:
// Q1 = [0, a] x [0, a], Q2 = [-a, 0] x [0, a],
// Q3 = [-a, 0] x [-a, 0], Q4 = [0, a] x [-a, 0].
const QUADRANT_SIGNS: [(i64, i64); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];

/// Kuwahara filter over a (2a+1) x (2a+1) window. Quadrants use population
/// variance; ties on minimal spread go to the lowest quadrant index.
pub fn kuwahara(img: &GrayImage, a: usize) -> Result<GrayImage> {
    if a < 1 {
        return Err(Error::Param("kuwahara half-window must be >= 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    let a = a as i64;
    let n = ((a + 1) * (a + 1)) as f64;

    let mut data = vec![0.0f64; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let mut best_var = f64::INFINITY;
            let mut best_mean = 0.0;
            for &(sx, sy) in &QUADRANT_SIGNS {
                let mut sum = 0.0;
                for dy in 0..=a {
                    for dx in 0..=a {
                        sum += img.sample_reflected(x as i64 + sx * dx, y as i64 + sy * dy);
                    }
                }
                let mean = sum / n;
                let mut sq = 0.0;
                for dy in 0..=a {
                    for dx in 0..=a {
                        let v = img.sample_reflected(x as i64 + sx * dx, y as i64 + sy * dy);
                        sq += (v - mean) * (v - mean);
                    }
                }
                let var = sq / n;
                if var < best_var {
                    best_var = var;
                    best_mean = mean;
                }
            }
            *out = best_mean.clamp(0.0, 255.0);
        }
    });
    GrayImage::from_data(w, h, data)
}

/// The two half-window feature configurations, realizing the 10x10 and 20x20
/// nominal windows as 11x11 and 21x21.
pub const KUWAHARA_CONFIGS: [usize; 2] = [5, 10];
