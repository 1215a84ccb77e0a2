use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kakeya_core::conditions::full_report;
use kakeya_core::geom::{distance_transform, fan, rasterize_points, rect_intersection_area, render, RenderMode};
use kakeya_core::ifs::visit_stopping_set;
use kakeya_core::mat2::{scaled_product, svd2};
use kakeya_core::pressure::{pressure_bounds, LowerMode};
use kakeya_core::{fixtures, Mat2, Vec2};

fn linear_algebra(c: &mut Criterion) {
    let m = Mat2::new(0.4, 0.5, 0.1, 0.4);
    c.bench_function("svd2", |b| b.iter(|| svd2(black_box(&m))));
    let ms: Vec<Mat2> = (0..64).map(|k| if k % 2 == 0 { m } else { m.transpose() }).collect();
    c.bench_function("scaled_product/64", |b| b.iter(|| scaled_product(black_box(&ms))));
}

fn pressure(c: &mut Criterion) {
    let sys = fixtures::edgar(0.4, 0.1);
    let d = LowerMode::for_system(&sys).d_constant();
    let mut group = c.benchmark_group("pressure_bounds");
    group.sample_size(10);
    for n in [12, 16] {
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| {
            b.iter(|| pressure_bounds(&sys, 1.18, n, d).unwrap())
        });
    }
    group.finish();
}

fn rendering(c: &mut Criterion) {
    let sys = fixtures::edgar(0.4, 0.1);
    let mut group = c.benchmark_group("render");
    group.sample_size(10);
    group.bench_function("stopping_set/r=1e-3", |b| {
        b.iter(|| {
            let mut n = 0u64;
            visit_stopping_set(&sys, 1.0, 1e-3, u64::MAX, |_, _, _| n += 1).unwrap();
            n
        })
    });
    group.bench_function("chaos_game/1e5", |b| {
        b.iter(|| render(&sys, RenderMode::ChaosGame { count: 100_000 }, u64::MAX, 0).unwrap())
    });
    let cloud = render(&sys, RenderMode::ChaosGame { count: 100_000 }, u64::MAX, 0).unwrap();
    let raster = rasterize_points(&cloud.points, 1024);
    group.bench_function("distance_transform/1024", |b| b.iter(|| distance_transform(black_box(&raster))));
    group.finish();
}

fn geometry(c: &mut Criterion) {
    let rects = fan(2, 1.0, 0.05, 0.3);
    c.bench_function("rect_intersection_area", |b| {
        b.iter(|| rect_intersection_area(black_box(&rects[0]), black_box(&rects[1])))
    });
}

fn conditions(c: &mut Criterion) {
    let mut group = c.benchmark_group("full_report");
    group.sample_size(10);
    let edgar = fixtures::edgar(0.4, 0.1);
    group.bench_function("edgar", |b| b.iter(|| full_report(&edgar)));
    let pair = fixtures::pair64(Vec2::new(1.0, 1.0));
    group.bench_function("pair64", |b| b.iter(|| full_report(&pair)));
    group.finish();
}

criterion_group!(benches, linear_algebra, pressure, rendering, geometry, conditions);
criterion_main!(benches);
