//! Periodic viscous Burgers `u_t + ½(u²)_x = ν u_xx` on `[0, 1)`.
//!
//! Pseudo-spectral in space with 2/3-rule dealiasing; in time an
//! integrating-factor (Lawson) RK4 that treats diffusion exactly.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{default_n_train, grid1d, DataError, DatasetBundle, Result};
use crate::par;
use crate::rng::Stream;
use crate::tensor::Tensor;

const GRF_MODES: usize = 128;
const CFL: f64 = 0.4;
const MIN_DT: f64 = 1e-12;

/// FFT plans and wavenumbers for one resolution.
pub struct BurgersSolver {
    n: usize,
    nu: f64,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// `2πk` per FFT bin.
    omega: Vec<f64>,
    keep: Vec<bool>,
    /// Drop `½(u²)_x`, leaving the heat equation (used for testing).
    pub linear_only: bool,
}

impl BurgersSolver {
    pub fn new(n: usize, nu: f64) -> Result<BurgersSolver> {
        if n < 4 || !n.is_power_of_two() {
            return Err(DataError::Invalid(format!("burgers resolution must be a power of two >= 4, got {n}")));
        }
        if !(nu > 0.0) {
            return Err(DataError::Invalid(format!("viscosity must be positive, got {nu}")));
        }
        let mut planner = FftPlanner::new();
        let wavenumber = |i: usize| if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        Ok(BurgersSolver {
            n,
            nu,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            omega: (0..n).map(|i| 2.0 * PI * wavenumber(i)).collect(),
            keep: (0..n).map(|i| 3.0 * wavenumber(i).abs() < n as f64).collect(),
            linear_only: false,
        })
    }

    fn to_spectral(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn to_physical(&self, mut v: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut v);
        let scale = 1.0 / self.n as f64;
        v.iter().map(|c| c.re * scale).collect()
    }

    /// Spectral `−½ ∂ₓ(u²)` with dealiasing.
    fn nonlinear(&self, v: &[Complex64]) -> Vec<Complex64> {
        if self.linear_only {
            return vec![Complex64::new(0.0, 0.0); self.n];
        }
        let masked: Vec<Complex64> = v
            .iter()
            .zip(&self.keep)
            .map(|(&c, &k)| if k { c } else { Complex64::new(0.0, 0.0) })
            .collect();
        let u = self.to_physical(masked);
        let sq: Vec<f64> = u.iter().map(|x| x * x).collect();
        let w = self.to_spectral(&sq);
        w.iter()
            .zip(&self.omega)
            .zip(&self.keep)
            .map(|((&c, &k), &keep)| if keep { Complex64::new(0.0, -0.5 * k) * c } else { Complex64::new(0.0, 0.0) })
            .collect()
    }

    /// One Lawson-RK4 step of size `dt` on physical values.
    pub fn step(&self, u: &[f64], dt: f64) -> Result<Vec<f64>> {
        if u.len() != self.n {
            return Err(DataError::Invalid(format!("state has {} points, solver expects {}", u.len(), self.n)));
        }
        let v = self.to_spectral(u);
        let e: Vec<f64> = self.omega.iter().map(|k| (-self.nu * k * k * dt).exp()).collect();
        let eh: Vec<f64> = self.omega.iter().map(|k| (-self.nu * k * k * dt / 2.0).exp()).collect();
        let lin = |f: &dyn Fn(usize) -> Complex64| (0..self.n).map(f).collect::<Vec<_>>();
        let k1 = self.nonlinear(&v);
        let k2 = self.nonlinear(&lin(&|i| eh[i] * (v[i] + k1[i] * (dt / 2.0))));
        let k3 = self.nonlinear(&lin(&|i| eh[i] * v[i] + k2[i] * (dt / 2.0)));
        let k4 = self.nonlinear(&lin(&|i| e[i] * v[i] + eh[i] * k3[i] * dt));
        let next = lin(&|i| e[i] * v[i] + (e[i] * k1[i] + (k2[i] + k3[i]) * (2.0 * eh[i]) + k4[i]) * (dt / 6.0));
        let out = self.to_physical(next);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(DataError::Solver(format!("non-finite state after a step of {dt:e}")));
        }
        Ok(out)
    }

    /// Integrates to `t_end` with uniform steps no larger than `CFL·dx/max|u₀|`
    /// (and `dt_max`), halving the step if the state blows up.
    pub fn solve(&self, u0: &[f64], t_end: f64, dt_max: f64) -> Result<Vec<f64>> {
        let umax = u0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dx = 1.0 / self.n as f64;
        let mut dt = dt_max.min(if umax > 0.0 { CFL * dx / umax } else { dt_max });
        loop {
            let steps = (t_end / dt).ceil().max(1.0) as usize;
            let h = t_end / steps as f64;
            let mut u = u0.to_vec();
            let mut ok = true;
            for _ in 0..steps {
                match self.step(&u, h) {
                    // Viscous Burgers obeys a maximum principle; growth means instability.
                    Ok(next) if next.iter().all(|v| v.abs() <= 2.0 * umax + 1e-12) => u = next,
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                return Ok(u);
            }
            dt = h / 2.0;
            if dt < MIN_DT {
                return Err(DataError::Solver("time step underflow".into()));
            }
        }
    }
}

/// A single solver step of size `dt`.
pub fn burgers_oracle_step(u: &[f64], nu: f64, dt: f64) -> Result<Vec<f64>> {
    BurgersSolver::new(u.len(), nu)?.step(u, dt)
}

/// Solves to `t_end` with the default step control.
pub fn solve_burgers(u0: &[f64], nu: f64, t_end: f64) -> Result<Vec<f64>> {
    BurgersSolver::new(u0.len(), nu)?.solve(u0, t_end, 1e-2)
}

/// Truncated Fourier sample of `N(0, 625(−Δ + 25I)⁻²)` on `x_j = j/n`:
/// mode `k` has standard deviation `25/(4π²k² + 25)` on the orthonormal
/// basis `{1, √2 cos 2πkx, √2 sin 2πkx}`.
pub fn grf_initial_condition(stream: &mut Stream, n: usize) -> Vec<f64> {
    let std = |k: f64| 25.0 / (4.0 * PI * PI * k * k + 25.0);
    let mut u = vec![std(0.0) * stream.normal(); n];
    for k in 1..GRF_MODES {
        let (a, b) = (stream.normal(), stream.normal());
        let s = std(k as f64) * std::f64::consts::SQRT_2;
        for (j, v) in u.iter_mut().enumerate() {
            let phase = 2.0 * PI * k as f64 * j as f64 / n as f64;
            *v += s * (a * phase.cos() + b * phase.sin());
        }
    }
    u
}

/// Maps `u₀` to `u(·, 1)`. Tensors are `[n, res, 1]` on `x_j = j/res`.
pub fn gen_burgers(n_samples: usize, resolution: usize, nu: f64, seed: u64) -> Result<DatasetBundle> {
    if n_samples < 2 {
        return Err(DataError::Invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    let solver = BurgersSolver::new(resolution, nu)?;
    let pairs = par::map_range(n_samples, |i| {
        let u0 = grf_initial_condition(&mut Stream::new(seed, "burgers", i as u64), resolution);
        solver.solve(&u0, 1.0, 1e-2).map(|u1| (u0, u1))
    });
    let (u0, u1): (Vec<_>, Vec<_>) = pairs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    let xs: Vec<f64> = (0..resolution).map(|j| j as f64 / resolution as f64).collect();
    let shape = [n_samples, resolution, 1];
    Ok(DatasetBundle {
        inputs: Tensor::new(u0.concat(), &shape).expect("shape"),
        outputs: Tensor::new(u1.concat(), &shape).expect("shape"),
        grid: grid1d(&xs),
        n_train: default_n_train(n_samples),
        problem: "burgers".into(),
        seed,
        params: serde_json::json!({
            "resolution": resolution,
            "nu": nu,
            "t_final": 1.0,
            "grf_modes": GRF_MODES,
        }),
    })
}
