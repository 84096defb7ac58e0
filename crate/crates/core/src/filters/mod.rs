//! The grey-level filter bank: every whole-image transform that contributes
//! a feature plane backing the per-pixel classifier.

mod diffusion;
mod hessian;
mod kuwahara;
mod morphology;
mod sobel;
mod stats;

pub use diffusion::{anisotropic_diffusion, DiffusionParams, DIFFUSION_CONFIGS};
pub use hessian::{
    hessian_planes, HessianAtPixel, HessianDiagnostics, HessianFlags, HessianPlanes,
    HESSIAN_PLANE_COUNT,
};
pub use kuwahara::{kuwahara, KUWAHARA_CONFIGS};
pub use morphology::{
    gray_dilate, gray_erode, invert, morph_configs, morph_feature, StructuringElement,
};
pub use sobel::{light_sobel, LIGHT_SOBEL_CONFIGS};
pub use stats::window_stats;
