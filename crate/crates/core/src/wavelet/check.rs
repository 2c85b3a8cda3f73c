//! Randomized self-check of the transforms: perfect reconstruction,
//! energy conservation and linearity on seeded random signals.

use super::{dwt1d, dwt2d, idwt1d, idwt2d, Result, WaveletError, WaveletFilter};
use crate::rng::{derive_seed, Stream};
use crate::tensor::{no_grad, Tensor};

/// Worst errors over all trials of [`self_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub trials: usize,
    /// Max-abs reconstruction error.
    pub roundtrip: f64,
    /// Max `|‖x‖² − ‖coeffs‖²| / ‖x‖²`.
    pub energy: f64,
    /// Max-abs error of `T(αx + βy) − αT(x) − βT(y)` over every band.
    pub linearity: f64,
    /// First trial exceeding `tolerance`, with the seed its signals came from.
    pub first_failure: Option<(usize, u64)>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.first_failure.is_none()
    }
}

fn bands(t: &Tensor, filter: &WaveletFilter, level: usize, two_d: bool) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    if two_d {
        let c = dwt2d(t, filter, level)?;
        out.extend_from_slice(c.approx.data());
        for d in c.details.iter().flatten() {
            out.extend_from_slice(d.data());
        }
    } else {
        let c = dwt1d(t, filter, level)?;
        out.extend_from_slice(c.approx.data());
        for d in &c.details {
            out.extend_from_slice(d.data());
        }
    }
    Ok(out)
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs `trials` random cases on signals of `shape` (one axis for 1-D,
/// two for 2-D). Trial `i` draws from the seed `derive_seed(seed, "dwt-check", i)`.
pub fn self_check(
    filter: &WaveletFilter,
    shape: &[usize],
    level: usize,
    trials: usize,
    seed: u64,
    tolerance: f64,
) -> Result<CheckReport> {
    let two_d = match shape.len() {
        1 => false,
        2 => true,
        n => return Err(WaveletError::Inconsistent(format!("self-check needs 1 or 2 axes, got {n}"))),
    };
    let n: usize = shape.iter().product();
    let mut report = CheckReport {
        trials,
        roundtrip: 0.0,
        energy: 0.0,
        linearity: 0.0,
        first_failure: None,
    };
    no_grad(|| -> Result<()> {
        for trial in 0..trials {
            let trial_seed = derive_seed(seed, "dwt-check", trial as u64);
            let mut s = Stream::new(trial_seed, "signal", 0);
            let mut draw = || Tensor::new((0..n).map(|_| s.normal()).collect(), shape);
            let (x, y) = (draw()?, draw()?);
            let (alpha, beta) = (s.uniform_in(-2.0, 2.0), s.uniform_in(-2.0, 2.0));

            let back = if two_d {
                idwt2d(&dwt2d(&x, filter, level)?, filter)?
            } else {
                idwt1d(&dwt1d(&x, filter, level)?, filter)?
            };
            let roundtrip = max_abs(back.data(), x.data());

            let bx = bands(&x, filter, level, two_d)?;
            let ex: f64 = x.data().iter().map(|v| v * v).sum();
            let ec: f64 = bx.iter().map(|v| v * v).sum();
            let energy = (ex - ec).abs() / ex;

            let by = bands(&y, filter, level, two_d)?;
            let combo = x.scale(alpha).add(&y.scale(beta))?;
            let bc = bands(&combo, filter, level, two_d)?;
            let expect: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| alpha * a + beta * b).collect();
            let linearity = max_abs(&bc, &expect);

            report.roundtrip = report.roundtrip.max(roundtrip);
            report.energy = report.energy.max(energy);
            report.linearity = report.linearity.max(linearity);
            let worst = roundtrip.max(energy).max(linearity);
            if report.first_failure.is_none() && !(worst <= tolerance) {
                report.first_failure = Some((trial, trial_seed));
            }
        }
        Ok(())
    })?;
    Ok(report)
}
