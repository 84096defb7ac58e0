//! Edge-preserving smoothing by Perona-Malik diffusion.
//!
//! Each sweep updates every pixel synchronously from the previous sweep's
//! values: new = I + lambda * sum over the four 4-neighbors of
//! g(grad) * grad, with grad = neighbor - center (reflected at borders) and
//! flux g(grad) = exp(-(grad / kappa)^2). The result is clamped to [0, 255]
//! only after the final sweep.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{reflect_coord, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionParams {
    /// Step weight; the configurations in use go up to 2.
    pub lambda: f64,
    /// Edge sensitivity; larger values smooth across stronger edges.
    pub kappa: f64,
    pub iterations: u32,
}

impl DiffusionParams {
    pub fn new(lambda: f64, kappa: f64, iterations: u32) -> Result<Self> {
        let p = DiffusionParams {
            lambda,
            kappa,
            iterations,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2.0).contains(&self.lambda) {
            return Err(Error::Param(format!(
                "diffusion lambda must be in [0, 2], got {}",
                self.lambda
            )));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::Param(format!(
                "diffusion kappa must be positive, got {}",
                self.kappa
            )));
        }
        if self.iterations == 0 {
            return Err(Error::Param("diffusion needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// The four parameter sets used as feature configurations, in feature order.
pub const DIFFUSION_CONFIGS: [DiffusionParams; 4] = [
    DiffusionParams {
        lambda: 0.3,
        kappa: 4.0,
        iterations: 20,
    },
    DiffusionParams {
        lambda: 0.5,
        kappa: 3.0,
        iterations: 10,
    },
    DiffusionParams {
        lambda: 2.0,
        kappa: 3.0,
        iterations: 35,
    },
    DiffusionParams {
        lambda: 0.8,
        kappa: 6.0,
        iterations: 40,
    },
];

pub fn anisotropic_diffusion(img: &GrayImage, p: &DiffusionParams) -> Result<GrayImage> {
    p.validate()?;
    let (w, h) = (img.width(), img.height());
    let mut cur = img.data().to_vec();
    let mut next = vec![0.0f64; w * h];
    let inv_kappa_sq = 1.0 / (p.kappa * p.kappa);

    for _ in 0..p.iterations {
        next.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            let up = reflect_coord(y as i64 - 1, h) * w;
            let down = reflect_coord(y as i64 + 1, h) * w;
            let here = y * w;
            for x in 0..w {
                let left = reflect_coord(x as i64 - 1, w);
                let right = reflect_coord(x as i64 + 1, w);
                let center = cur[here + x];
                let mut acc = 0.0;
                for nb in [cur[up + x], cur[down + x], cur[here + left], cur[here + right]] {
                    let grad = nb - center;
                    acc += (-grad * grad * inv_kappa_sq).exp() * grad;
                }
                row[x] = center + p.lambda * acc;
            }
        });
        std::mem::swap(&mut cur, &mut next);
    }

    for v in &mut cur {
        *v = v.clamp(0.0, 255.0);
    }
    GrayImage::from_data(w, h, cur)
}
