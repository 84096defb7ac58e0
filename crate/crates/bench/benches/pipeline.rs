use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use vesselgrow_bench::{bench_image, bench_rows};
use vesselgrow_core::element::{segment, ElementParams};
use vesselgrow_core::featureset::extract_stack;
use vesselgrow_core::filters::{
    anisotropic_diffusion, gray_dilate, hessian_planes, kuwahara, window_stats,
    StructuringElement, DIFFUSION_CONFIGS,
};
use vesselgrow_core::forest::{train, ForestParams};

fn filters(c: &mut Criterion) {
    let img = bench_image(128);
    c.bench_function("hessian_planes_128", |b| {
        b.iter(|| hessian_planes(black_box(&img)).unwrap())
    });
    c.bench_function("window_stats_7_128", |b| {
        b.iter(|| window_stats(black_box(&img), 7).unwrap())
    });
    c.bench_function("diffusion_20it_128", |b| {
        b.iter(|| anisotropic_diffusion(black_box(&img), &DIFFUSION_CONFIGS[0]).unwrap())
    });
    let b2 = StructuringElement::b2();
    c.bench_function("dilate_b2_128", |b| {
        b.iter(|| gray_dilate(black_box(&img), &b2))
    });
    c.bench_function("kuwahara_a5_128", |b| {
        b.iter(|| kuwahara(black_box(&img), 5).unwrap())
    });
}

fn full_stack(c: &mut Criterion) {
    let img = bench_image(128);
    let mut group = c.benchmark_group("stack");
    group.sample_size(10);
    group.bench_function("extract_stack_128", |b| {
        b.iter(|| extract_stack(black_box(&img)).unwrap())
    });
    group.finish();
}

fn forest(c: &mut Criterion) {
    let rows = bench_rows(128, 1.0);
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("train_25_trees_16k_rows", |b| {
        let params = ForestParams {
            n_trees: 25,
            seed: 1,
            ..ForestParams::default()
        };
        b.iter(|| train(black_box(&rows), &params).unwrap())
    });
    group.finish();
}

fn element(c: &mut Criterion) {
    let rows = bench_rows(128, 1.0);
    let model = train(
        &rows,
        &ForestParams {
            n_trees: 25,
            seed: 1,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let img = bench_image(128);
    let mut group = c.benchmark_group("element");
    group.sample_size(10);
    group.bench_function("segment_128", |b| {
        b.iter(|| segment(black_box(&img), &model, &ElementParams::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, filters, full_stack, forest, element);
criterion_main!(benches);
