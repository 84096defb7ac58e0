//! Directional brightness test derived from the Sobel operator: a pixel
//! fires only when it exceeds all four axis neighbors at distance `d` by
//! more than threshold `t`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Plane};

/// Binary plane (0/1): 1 where I(x,y) - I(x, y +/- d) > t vertically and
/// I(x,y) - I(x +/- d, y) > t horizontally, with reflected sampling.
pub fn light_sobel(img: &GrayImage, t: f64, d: usize) -> Result<Plane> {
    if d < 1 {
        return Err(Error::Param("light sobel distance must be >= 1".into()));
    }
    let (w, h) = (img.width(), img.height());
    let d = d as i64;

    let mut data = vec![0.0f64; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, out) in row.iter_mut().enumerate() {
            let (xi, yi) = (x as i64, y as i64);
            let center = img.get(x, y);
            let fires = center - img.sample_reflected(xi, yi - d) > t
                && center - img.sample_reflected(xi, yi + d) > t
                && center - img.sample_reflected(xi - d, yi) > t
                && center - img.sample_reflected(xi + d, yi) > t;
            *out = if fires { 1.0 } else { 0.0 };
        }
    });
    Plane::from_data(w, h, data)
}

/// The two (threshold, distance) feature configurations, in feature order.
pub const LIGHT_SOBEL_CONFIGS: [(f64, usize); 2] = [(-10.0, 2), (-10.0, 5)];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    #[test]
    fn constant_image_fires_everywhere_with_negative_threshold() {
        let img = GrayImage::from_fn(8, 8, |_, _| 120.0).unwrap();
        let out = light_sobel(&img, -10.0, 2).unwrap();
        assert!(out.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn bright_spot_fires() {
        let img = GrayImage::from_fn(11, 11, |x, y| if (x, y) == (5, 5) { 255.0 } else { 0.0 })
            .unwrap();
        let out = light_sobel(&img, -10.0, 2).unwrap();
        assert_eq!(out.get(5, 5), 1.0);
    }

    #[test]
    fn dark_spot_does_not_fire() {
        let img = GrayImage::from_fn(11, 11, |x, y| if (x, y) == (5, 5) { 0.0 } else { 255.0 })
            .unwrap();
        let out = light_sobel(&img, -10.0, 2).unwrap();
        assert_eq!(out.get(5, 5), 0.0);
    }

    #[test]
    fn binary_output() {
        let mut rng = SplitMix64::new(9);
        let img = GrayImage::from_fn(16, 16, |_, _| rng.next_f64() * 255.0).unwrap();
        for (t, d) in LIGHT_SOBEL_CONFIGS {
            let out = light_sobel(&img, t, d).unwrap();
            assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = SplitMix64::new(10);
        for _ in 0..10 {
            let img = GrayImage::from_fn(16, 16, |_, _| rng.next_below(256) as f64).unwrap();
            for (t, d) in LIGHT_SOBEL_CONFIGS {
                let out = light_sobel(&img, t, d).unwrap();
                let di = d as i64;
                for y in 0..16i64 {
                    for x in 0..16i64 {
                        let c = img.get(x as usize, y as usize);
                        let expect = [(0, -di), (0, di), (-di, 0), (di, 0)]
                            .iter()
                            .all(|&(dx, dy)| c - img.sample_reflected(x + dx, y + dy) > t);
                        assert_eq!(
                            out.get(x as usize, y as usize),
                            if expect { 1.0 } else { 0.0 }
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn zero_distance_rejected() {
        let img = GrayImage::from_fn(4, 4, |_, _| 0.0).unwrap();
        assert!(matches!(light_sobel(&img, -10.0, 0), Err(Error::Param(_))));
    }
}
