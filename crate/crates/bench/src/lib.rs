//! Shared fixtures for the pipeline benchmarks.

use vesselgrow_core::featureset::{build_training_rows, LabeledDataset, RowSampling};
use vesselgrow_core::imaging::{DatasetEntry, GrayImage};
use vesselgrow_core::phantom::{generate, PhantomParams};

/// A phantom frame at the given edge length.
pub fn bench_image(size: usize) -> GrayImage {
    let params = PhantomParams {
        width: size,
        height: size,
        trunks: 3,
        ..PhantomParams::default()
    };
    generate(&params, 99).0
}

/// A labeled training table drawn from one phantom frame.
pub fn bench_rows(size: usize, rate: f64) -> LabeledDataset {
    let params = PhantomParams {
        width: size,
        height: size,
        trunks: 3,
        ..PhantomParams::default()
    };
    let (image, truth) = generate(&params, 99);
    let entry = DatasetEntry {
        image_id: "bench".into(),
        image,
        truth,
    };
    build_training_rows(&entry, &RowSampling::uniform(rate, 7)).unwrap()
}
