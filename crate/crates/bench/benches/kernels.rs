use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use liouville_core::build_sieve;
use liouville_core::entropy::{build_joint, LogWeightedModel};
use liouville_core::expsum::{chowla_avg, fourth_moment_primes, ChowlaMethod};
use liouville_core::intervals::{variance, ArithFn, WindowKind, WindowSpec};

fn sieve(c: &mut Criterion) {
    let mut g = c.benchmark_group("sieve");
    for n in [100_000u64, 1_000_000] {
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, &n| b.iter(|| build_sieve(1, black_box(n)).unwrap()));
    }
    g.bench_function("segment at 1e9", |b| b.iter(|| build_sieve(black_box(1_000_000_000), 1_000_100_000).unwrap()));
    g.finish();
}

fn short_interval_variance(c: &mut Criterion) {
    let spec = WindowSpec::new(WindowKind::Multiplicative, 1_000_000, 1_000.0).unwrap();
    c.bench_function("variance x=1e6 h=1e3", |b| b.iter(|| variance(&ArithFn::Liouville, black_box(&spec)).unwrap()));
}

fn chowla(c: &mut Criterion) {
    let mut g = c.benchmark_group("chowla_avg x=1e5 h=100");
    g.sample_size(10);
    g.bench_function("fourier", |b| b.iter(|| chowla_avg(black_box(100_000), 100, ChowlaMethod::Fourier).unwrap()));
    g.bench_function("naive", |b| b.iter(|| chowla_avg(black_box(100_000), 100, ChowlaMethod::Naive).unwrap()));
    g.finish();
}

fn fourth_moment(c: &mut Criterion) {
    c.bench_function("fourth moment h=1e4", |b| b.iter(|| fourth_moment_primes(black_box(10_000)).unwrap()));
}

fn joint(c: &mut Criterion) {
    let model = LogWeightedModel::new(100_000, 100.0).unwrap();
    let mut g = c.benchmark_group("build_joint x=1e5 w=100");
    g.sample_size(10);
    for h in [6usize, 10] {
        g.bench_with_input(BenchmarkId::from_parameter(h), &h, |b, &h| b.iter(|| build_joint(&model, h, 1.0).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, sieve, short_interval_variance, chowla, fourth_moment, joint);
criterion_main!(benches);
