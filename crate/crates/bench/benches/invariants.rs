use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use dpt_bench::{big_classical, labeled, triangle};
use dpt_core::invariants::{bracket, resolution_set};
use dpt_core::lattice::{cover, minimize, LatticeMatrix};
use dpt_core::moves::{builtin_catalog, find_moves};

fn bench_bracket(c: &mut Criterion) {
    let small = triangle();
    let big = big_classical();
    c.bench_function("bracket/triangle-3", |b| {
        b.iter(|| bracket(black_box(&small)).unwrap())
    });
    c.bench_function("bracket/cover-12", |b| {
        b.iter(|| bracket(black_box(&big)).unwrap())
    });
}

fn bench_resolution_set(c: &mut Criterion) {
    let d = labeled();
    c.bench_function("resolution_set/e1-double-cover", |b| {
        b.iter(|| resolution_set(black_box(&d)).unwrap())
    });
}

fn bench_cover(c: &mut Criterion) {
    let d = triangle();
    let l = LatticeMatrix::new(2, 1, 0, 3);
    c.bench_function("cover/triangle-index-6", |b| {
        b.iter(|| cover(black_box(&d), black_box(&l)).unwrap())
    });
    let big = big_classical();
    c.bench_function("minimize/cover-12", |b| {
        b.iter(|| minimize(black_box(&big)))
    });
}

fn bench_find_moves(c: &mut Criterion) {
    let catalog = builtin_catalog();
    let d = big_classical();
    c.bench_function("find_moves/cover-12", |b| {
        b.iter(|| find_moves(black_box(&d), catalog, None))
    });
}

criterion_group!(
    benches,
    bench_bracket,
    bench_resolution_set,
    bench_cover,
    bench_find_moves
);
criterion_main!(benches);
