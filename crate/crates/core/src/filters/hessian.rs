//! Per-pixel Hessian matrix and the ten indices derived from it.
//!
//! Second derivatives use the plain 1-D kernels [1, -2, 1] along each axis
//! and composed central differences ([-1, 0, 1]/2 in x then in y) for the
//! cross term, all with reflected sampling and no pre-smoothing. Since the
//! cross kernel is symmetric in x and y, the off-diagonal coefficients are
//! exactly equal.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imaging::{GrayImage, Plane};

/// The 2x2 Hessian at one pixel: a = I_xx, b = I_xy, c = I_yx, d = I_yy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HessianAtPixel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Flags raised when a printed formula's radicand goes negative and the
/// affected features fall back to 0. Cannot trigger with the symmetric
/// cross-derivative kernel, but the guard stays observable.
#[derive(Debug, Clone, Copy, Default)]
pub struct HessianFlags {
    pub negative_discriminant: bool,
    pub negative_modulus: bool,
}

/// Running totals of guard activations over a whole image.
#[derive(Debug, Clone, Copy, Default)]
pub struct HessianDiagnostics {
    pub negative_discriminants: u64,
    pub negative_moduli: u64,
}

/// Ten planes in the order [det, a, b, c, d, lambda1, lambda2,
/// gamma-normalized eigenvalue difference (t = 1), modulus, trace].
#[derive(Debug)]
pub struct HessianPlanes {
    pub planes: Vec<Plane>,
    pub diagnostics: HessianDiagnostics,
}

pub const HESSIAN_PLANE_COUNT: usize = 10;

impl HessianAtPixel {
    /// Sample the Hessian of `img` at (x, y) with reflected borders.
    pub fn at(img: &GrayImage, x: i64, y: i64) -> Self {
        let s = |dx: i64, dy: i64| img.sample_reflected(x + dx, y + dy);
        let center = s(0, 0);
        let a = s(-1, 0) - 2.0 * center + s(1, 0);
        let d = s(0, -1) - 2.0 * center + s(0, 1);
        let b = (s(1, 1) - s(-1, 1) - s(1, -1) + s(-1, -1)) / 4.0;
        HessianAtPixel { a, b, c: b, d }
    }

    /// The ten derived features, ordered as in [`HessianPlanes`].
    pub fn features(&self) -> ([f64; HESSIAN_PLANE_COUNT], HessianFlags) {
        let HessianAtPixel { a, b, c, d } = *self;
        let mut flags = HessianFlags::default();

        let det = a * d - c * b;
        let trace = a + d;

        let discriminant = (a - d) * (a - d) + 4.0 * b * c;
        let (l1, l2) = if discriminant >= 0.0 {
            let root = discriminant.sqrt();
            ((trace - root) / 2.0, (trace + root) / 2.0)
        } else {
            flags.negative_discriminant = true;
            (0.0, 0.0)
        };

        let diff = a - d;
        let gamma = diff * diff * (diff * diff + 4.0 * b * b);

        let modulus_sq = a * a + b * c + d * d;
        let modulus = if modulus_sq >= 0.0 {
            modulus_sq.sqrt()
        } else {
            flags.negative_modulus = true;
            0.0
        };

        ([det, a, b, c, d, l1, l2, gamma, modulus, trace], flags)
    }
}

/// Compute all ten Hessian feature planes. Planes are unclamped.
pub fn hessian_planes(img: &GrayImage) -> Result<HessianPlanes> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!(
            "hessian features need at least 3x3, got {w}x{h}"
        )));
    }

    let mut rows: Vec<([Vec<f64>; HESSIAN_PLANE_COUNT], HessianDiagnostics)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row: [Vec<f64>; HESSIAN_PLANE_COUNT] =
                std::array::from_fn(|_| Vec::with_capacity(w));
            let mut diag = HessianDiagnostics::default();
            for x in 0..w {
                let (feats, flags) = HessianAtPixel::at(img, x as i64, y as i64).features();
                for (k, v) in feats.iter().enumerate() {
                    row[k].push(*v);
                }
                diag.negative_discriminants += flags.negative_discriminant as u64;
                diag.negative_moduli += flags.negative_modulus as u64;
            }
            (row, diag)
        })
        .collect();

    let mut planes: Vec<Vec<f64>> = (0..HESSIAN_PLANE_COUNT)
        .map(|_| Vec::with_capacity(w * h))
        .collect();
    let mut diagnostics = HessianDiagnostics::default();
    for (row, diag) in rows.iter_mut() {
        for (k, chunk) in row.iter_mut().enumerate() {
            planes[k].append(chunk);
        }
        diagnostics.negative_discriminants += diag.negative_discriminants;
        diagnostics.negative_moduli += diag.negative_moduli;
    }

    Ok(HessianPlanes {
        planes: planes
            .into_iter()
            .map(|data| Plane::from_data(w, h, data).expect("row-major assembly"))
            .collect(),
        diagnostics,
    })
}
