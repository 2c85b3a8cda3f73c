//! Parallel versus sequential execution of the hot kernels.
//!
//! Each benchmark runs twice, once per dispatch mode of `par`. On a
//! single-core machine the two should be close; the gap shows the
//! rayon overhead or speedup on the host.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uwno_core::model::{UwnoConfig, UwnoModel};
use uwno_core::par;
use uwno_core::rng::Stream;
use uwno_core::tensor::{PaddingMode, Tensor};
use uwno_core::train::relative_l2;
use uwno_core::wavelet::{dwt2d, WaveletFilter};

const MODES: [(&str, bool); 2] = [("parallel", false), ("sequential", true)];

fn randn(shape: &[usize], seed: u64) -> Tensor {
    let mut s = Stream::new(seed, "bench", 0);
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| s.normal()).collect(), shape).unwrap()
}

fn param(shape: &[usize], seed: u64) -> Tensor {
    let t = randn(shape, seed);
    Tensor::param(t.to_vec(), shape).unwrap()
}

fn conv2d(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv2d_fwd_bwd");
    let x = param(&[8, 32, 33, 33], 1);
    let w = param(&[16, 32, 3, 3], 2);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let y = x.conv2d(&w, 1, PaddingMode::Zero).unwrap();
                y.sum().backward().unwrap();
                black_box(y.numel())
            })
        });
    }
    par::set_sequential(false);
    g.finish();
}

fn dwt(c: &mut Criterion) {
    let mut g = c.benchmark_group("dwt2d_db4_level3");
    let x = randn(&[8, 32, 33, 33], 3);
    let f = WaveletFilter::by_name("db4").unwrap();
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(dwt2d(&x, &f, 3).unwrap().approx.numel()))
        });
    }
    par::set_sequential(false);
    g.finish();
}

fn gelu(c: &mut Criterion) {
    let mut g = c.benchmark_group("gelu_1m");
    let x = randn(&[1 << 20], 4);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| black_box(x.gelu().numel())));
    }
    par::set_sequential(false);
    g.finish();
}

fn training_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("uwno_step_poisson33");
    g.sample_size(10);
    let mut cfg = UwnoConfig::for_resolution(&[33, 33]);
    cfg.width = 32;
    cfg.unet_channels = Some(vec![8, 16]);
    let model = UwnoModel::new(&cfg, 0).unwrap();
    let x = randn(&[4, 33, 33, 1], 5);
    let y = randn(&[4, 33, 33, 1], 6);
    let grid = randn(&[33, 33, 2], 7);
    for (name, seq) in MODES {
        par::set_sequential(seq);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let loss = relative_l2(&model.forward(&x, &grid).unwrap(), &y).unwrap();
                loss.backward().unwrap();
                model.params().zero_grads();
                black_box(loss.item().unwrap())
            })
        });
    }
    par::set_sequential(false);
    g.finish();
}

criterion_group!(benches, conv2d, dwt, gelu, training_step);
criterion_main!(benches);
