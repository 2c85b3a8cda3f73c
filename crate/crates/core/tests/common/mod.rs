#![allow(dead_code)]

use uwno_core::rng::Stream;
use uwno_core::tensor::{no_grad, Tensor};

pub fn randn(shape: &[usize], seed: u64) -> Tensor {
    let mut s = Stream::new(seed, "test", 0);
    let n = shape.iter().product();
    Tensor::new((0..n).map(|_| s.normal()).collect(), shape).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Compares reverse-mode gradients of the scalar `f` against central
/// differences with step `h`. Returns, per input,
/// `‖analytic − numeric‖∞ / max(‖analytic‖∞, ‖numeric‖∞)`.
pub fn grad_check<F>(f: F, inputs: &[Tensor], h: f64) -> Vec<f64>
where
    F: Fn(&[Tensor]) -> Tensor,
{
    let leaves: Vec<Tensor> = inputs
        .iter()
        .map(|t| Tensor::param(t.to_vec(), t.shape()).unwrap())
        .collect();
    f(&leaves).backward().unwrap();
    let eval = |which: usize, idx: usize, delta: f64| -> f64 {
        no_grad(|| {
            let moved: Vec<Tensor> = inputs
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let mut d = t.to_vec();
                    if i == which {
                        d[idx] += delta;
                    }
                    Tensor::new(d, t.shape()).unwrap()
                })
                .collect();
            f(&moved).item().unwrap()
        })
    };
    leaves
        .iter()
        .enumerate()
        .map(|(i, leaf)| {
            let analytic = leaf.grad().unwrap_or_else(|| vec![0.0; leaf.numel()]);
            let numeric: Vec<f64> = (0..leaf.numel())
                .map(|j| (eval(i, j, h) - eval(i, j, -h)) / (2.0 * h))
                .collect();
            let scale = analytic
                .iter()
                .chain(&numeric)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            if scale == 0.0 {
                0.0
            } else {
                max_abs_diff(&analytic, &numeric) / scale
            }
        })
        .collect()
}

/// Weighted sum so that every output element gets a distinct gradient.
pub fn probe(t: &Tensor, seed: u64) -> Tensor {
    t.mul(&randn(t.shape(), seed ^ 0xABCD)).unwrap().sum()
}

pub fn assert_grads(errs: &[f64], tol: f64, what: &str) {
    for (i, e) in errs.iter().enumerate() {
        assert!(*e <= tol, "{what}: input {i} relative gradient error {e:.3e} > {tol:.0e}");
    }
}

use uwno_core::model::{UwnoConfig, UwnoModel};
use uwno_core::train::relative_l2;

/// 1-D, N=16, d_v=4, L=2, Haar, m=2.
pub fn tiny_config() -> UwnoConfig {
    let mut cfg = UwnoConfig::for_resolution(&[16]);
    cfg.width = 4;
    cfg.proj_dim = 8;
    cfg.layers = 2;
    cfg.wavelet = "db1".into();
    cfg.level = 2;
    cfg
}

/// Input, grid and a smooth nonzero target for `tiny_config`.
pub fn tiny_batch(batch: usize, seed: u64) -> (Tensor, Tensor, Tensor) {
    let x = randn(&[batch, 16, 1], seed);
    let xs: Vec<f64> = (0..16).map(|i| i as f64 / 16.0).collect();
    let grid = Tensor::new(xs.clone(), &[16, 1]).unwrap();
    let y: Vec<f64> = (0..batch)
        .flat_map(|b| xs.iter().map(move |x| (2.0 * std::f64::consts::PI * x).sin() + 0.3 * b as f64 + 0.5))
        .collect();
    (x, grid, Tensor::new(y, &[batch, 16, 1]).unwrap())
}

/// Relative gradient error of the relative-L2 loss for every parameter
/// tensor of `model`, paired with the parameter name.
pub fn model_grad_errors(model: &UwnoModel, x: &Tensor, grid: &Tensor, y: &Tensor) -> Vec<(String, f64)> {
    let errs = grad_check(
        |t| relative_l2(&model.with_tensors(t).unwrap().forward(x, grid).unwrap(), y).unwrap(),
        model.params().tensors(),
        1e-6,
    );
    model.params().iter().map(|(n, _)| n.to_string()).zip(errs).collect()
}
