//! Windowed order statistics: mean, max, min, median over a square
//! neighborhood with reflected borders.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Plane};

/// Compute the four statistic planes over a `size` x `size` window centered
/// on each pixel. Returned order: [mean, max, min, median]. The median of an
/// odd sample count is the middle order statistic.
pub fn window_stats(img: &GrayImage, size: usize) -> Result<[Plane; 4]> {
    if size < 3 || size % 2 == 0 {
        return Err(Error::Param(format!(
            "window size must be odd and >= 3, got {size}"
        )));
    }
    let (w, h) = (img.width(), img.height());
    let r = (size / 2) as i64;
    let n = size * size;
    let mid = (n - 1) / 2;

    let rows: Vec<[Vec<f64>; 4]> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(w));
            let mut window = vec![0.0f64; n];
            for x in 0..w {
                let mut sum = 0.0;
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut k = 0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let v = img.sample_reflected(x as i64 + dx, y as i64 + dy);
                        sum += v;
                        lo = lo.min(v);
                        hi = hi.max(v);
                        window[k] = v;
                        k += 1;
                    }
                }
                window.sort_unstable_by(f64::total_cmp);
                out[0].push(sum / n as f64);
                out[1].push(hi);
                out[2].push(lo);
                out[3].push(window[mid]);
            }
            out
        })
        .collect();

    let mut planes: [Vec<f64>; 4] = std::array::from_fn(|_| Vec::with_capacity(w * h));
    for mut row in rows {
        for (k, chunk) in row.iter_mut().enumerate() {
            planes[k].append(chunk);
        }
    }
    let [mean, max, min, median] = planes;
    Ok([
        Plane::from_data(w, h, mean)?,
        Plane::from_data(w, h, max)?,
        Plane::from_data(w, h, min)?,
        Plane::from_data(w, h, median)?,
    ])
}
