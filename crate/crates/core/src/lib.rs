//! Vessel segmentation for 2-D X-ray cardiac angiograms.
//!
//! The pipeline classifies every pixel as vessel or background using a
//! 30-value feature vector: 28 grey-level planes (Hessian indices, window
//! statistics, anisotropic diffusion, grey-level morphology, Kuwahara
//! smoothing, and a thresholded directional-difference filter) plus two
//! binary connectivity flags that are updated in real time while a
//! region-growing engine walks the image. A random forest supplies the
//! per-pixel vessel probability; a leave-one-image-out harness evaluates
//! the whole loop against annotated ground truth.

pub mod element;
pub mod error;
pub mod eval;
pub mod featureset;
pub mod filters;
pub mod forest;
pub mod imaging;
pub mod phantom;
pub mod rng;

mod connectivity;

pub use error::{Error, Result};
pub use imaging::{BinaryMask, DatasetEntry, GrayImage, Plane};
