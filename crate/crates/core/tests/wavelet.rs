mod common;

use common::{assert_grads, grad_check, max_abs_diff, randn};
use proptest::prelude::*;
use uwno_core::tensor::Tensor;
use uwno_core::wavelet::{dwt1d, dwt2d, idwt1d, idwt2d, max_level, DwtCoeffs, WaveletFilter};

fn db(order: usize) -> WaveletFilter {
    WaveletFilter::daubechies(order).unwrap()
}

fn flatten(c: &DwtCoeffs) -> Vec<f64> {
    let mut v = c.approx.to_vec();
    for d in &c.details {
        v.extend_from_slice(d.data());
    }
    v
}

#[test]
fn db6_length_1024_level_8_roundtrip() {
    let x = randn(&[1024], 1);
    let f = db(6);
    let y = idwt1d(&dwt1d(&x, &f, 8).unwrap(), &f).unwrap();
    assert!(max_abs_diff(x.data(), y.data()) <= 1e-10);
}

#[test]
fn db4_85x85_level_4_roundtrip() {
    let x = randn(&[85, 85], 2);
    let f = db(4);
    let co = dwt2d(&x, &f, 4).unwrap();
    assert_eq!(co.zeta(), (6, 6));
    let y = idwt2d(&co, &f).unwrap();
    assert_eq!(y.shape(), &[85, 85]);
    assert!(max_abs_diff(x.data(), y.data()) <= 1e-10);
}

#[test]
fn energy_conserved_on_64x64() {
    let x = randn(&[64, 64], 3);
    for order in [1, 3, 8] {
        let co = dwt2d(&x, &db(order), 3).unwrap();
        let e: f64 = x.data().iter().map(|v| v * v).sum();
        assert!((co.energy() - e).abs() <= 1e-10 * e.max(1.0), "db{order}");
    }
}

#[test]
fn batched_leading_axes_transform_independently() {
    let x = randn(&[3, 2, 40], 4);
    let f = db(2);
    let co = dwt1d(&x, &f, 2).unwrap();
    let single = dwt1d(&x.narrow(0, 1, 1).unwrap().narrow(1, 1, 1).unwrap(), &f, 2).unwrap();
    let picked = co.approx.narrow(0, 1, 1).unwrap().narrow(1, 1, 1).unwrap();
    assert!(max_abs_diff(picked.data(), single.approx.data()) < 1e-15);
}

#[test]
fn all_zero_coefficients_give_zero_signal() {
    let f = db(3);
    let mut co = dwt1d(&randn(&[50], 5), &f, 2).unwrap();
    co.approx = Tensor::zeros(co.approx.shape());
    for d in &mut co.details {
        *d = Tensor::zeros(d.shape());
    }
    assert!(idwt1d(&co, &f).unwrap().data().iter().all(|&v| v == 0.0));
}

#[test]
fn dwt_gradients_match_finite_differences() {
    let f = db(3);
    let w1 = randn(&[40], 6);
    let errs = grad_check(
        |t| {
            let co = dwt1d(&t[0], &f, 2).unwrap();
            let a = co.approx.square().sum();
            let d = co.details[0].tanh().sum();
            a.add(&d).unwrap()
        },
        &[randn(&[37], 7)],
        1e-6,
    );
    assert_grads(&errs, 1e-5, "dwt1d");
    let errs = grad_check(
        |t| {
            let mut co = dwt1d(&t[0], &f, 2).unwrap();
            co.details[1] = co.details[1].scale(0.0);
            idwt1d(&co, &f).unwrap().mul(&w1.narrow(0, 0, 37).unwrap()).unwrap().sin().sum()
        },
        &[randn(&[37], 8)],
        1e-6,
    );
    assert_grads(&errs, 1e-5, "idwt1d");
    let w2 = randn(&[13, 11], 9);
    let errs = grad_check(
        |t| {
            let co = dwt2d(&t[0], &db(2), 2).unwrap();
            let y = idwt2d(&co, &db(2)).unwrap();
            y.mul(&w2).unwrap().sum().add(&co.details[0][2].square().sum()).unwrap()
        },
        &[randn(&[13, 11], 10)],
        1e-6,
    );
    assert_grads(&errs, 1e-5, "dwt2d");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prop_roundtrip_1d(order in 1usize..=8, len in 16usize..300, level in 1usize..=6, seed in 0u64..1000) {
        let f = db(order);
        prop_assume!(len >= f.len() && level <= max_level(len));
        let x = randn(&[len], seed);
        let co = dwt1d(&x, &f, level).unwrap();
        prop_assert_eq!(co.details.len(), level);
        prop_assert_eq!(co.zeta() << level, len.div_ceil(1 << level) << level);
        let y = idwt1d(&co, &f).unwrap();
        prop_assert!(max_abs_diff(x.data(), y.data()) <= 1e-10);
    }

    #[test]
    fn prop_energy_power_of_two(order in 1usize..=8, exp in 4u32..10, level in 1usize..=4, seed in 0u64..1000) {
        let x = randn(&[1usize << exp], seed);
        let co = dwt1d(&x, &db(order), level).unwrap();
        let e: f64 = x.data().iter().map(|v| v * v).sum();
        prop_assert!((co.energy() - e).abs() <= 1e-10 * e);
    }

    #[test]
    fn prop_linearity(order in 1usize..=8, alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
        let f = db(order);
        let (x, y) = (randn(&[70], seed), randn(&[70], seed + 1));
        let mix = x.scale(alpha).add(&y.scale(beta)).unwrap();
        let lhs = flatten(&dwt1d(&mix, &f, 3).unwrap());
        let (cx, cy) = (flatten(&dwt1d(&x, &f, 3).unwrap()), flatten(&dwt1d(&y, &f, 3).unwrap()));
        let rhs: Vec<f64> = cx.iter().zip(&cy).map(|(a, b)| alpha * a + beta * b).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-12);
    }

    #[test]
    fn prop_roundtrip_2d(order in 1usize..=4, h in 8usize..40, w in 8usize..40, level in 1usize..=3, seed in 0u64..1000) {
        let f = db(order);
        prop_assume!(h >= f.len() && w >= f.len());
        let x = randn(&[2, h, w], seed);
        let y = idwt2d(&dwt2d(&x, &f, level).unwrap(), &f).unwrap();
        prop_assert!(max_abs_diff(x.data(), y.data()) <= 1e-10);
    }
}
