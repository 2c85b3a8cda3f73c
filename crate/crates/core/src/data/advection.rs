use super::{default_n_train, grid1d, grid2d, DataError, DatasetBundle, Result};
use crate::par;
use crate::rng::Stream;
use crate::tensor::Tensor;

/// Bump parameters: center `c`, width `omega`, height `h` and the
/// sharpness `a` of the elliptic cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdvectionParams {
    pub c: f64,
    pub omega: f64,
    pub h: f64,
    pub a: f64,
}

impl AdvectionParams {
    /// Draws `(c, ω, h)` from `[0.3,0.7]×[0.3,0.6]×[1,2]`; `a = 2/ω`.
    pub fn sample(stream: &mut Stream) -> AdvectionParams {
        let c = stream.uniform_in(0.3, 0.7);
        let omega = stream.uniform_in(0.3, 0.6);
        let h = stream.uniform_in(1.0, 2.0);
        AdvectionParams { c, omega, h, a: 2.0 / omega }
    }
}

/// `u₀(x) = h·1{|x−c| ≤ ω/2} + √max(h² − (a(x−c))², 0)`, with `x − c`
/// measured periodically on the unit interval.
pub fn advection_initial(p: &AdvectionParams, x: f64) -> f64 {
    let d = (x - p.c + 0.5).rem_euclid(1.0) - 0.5;
    let step = if d.abs() <= p.omega / 2.0 { p.h } else { 0.0 };
    step + (p.h * p.h - (p.a * d).powi(2)).max(0.0).sqrt()
}

fn check(n_samples: usize, resolution: usize) -> Result<()> {
    if resolution < 16 {
        return Err(DataError::Invalid(format!("advection resolution must be >= 16, got {resolution}")));
    }
    if n_samples < 2 {
        return Err(DataError::Invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    Ok(())
}

/// Case I: `u₀ ↦ u(·, t_final) = u₀((x − t_final) mod 1)` at unit speed
/// on the grid `x_i = i/res`. Tensors are `[n, res, 1]`.
pub fn gen_advection(n_samples: usize, resolution: usize, t_final: f64, seed: u64) -> Result<DatasetBundle> {
    check(n_samples, resolution)?;
    if !(t_final > 0.0 && t_final < 1.0) {
        return Err(DataError::Invalid(format!("t_final must lie in (0, 1), got {t_final}")));
    }
    let xs: Vec<f64> = (0..resolution).map(|i| i as f64 / resolution as f64).collect();
    let samples = par::map_range(n_samples, |i| {
        let p = AdvectionParams::sample(&mut Stream::new(seed, "advection", i as u64));
        let u0: Vec<f64> = xs.iter().map(|&x| advection_initial(&p, x)).collect();
        let ut: Vec<f64> = xs
            .iter()
            .map(|&x| advection_initial(&p, (x - t_final).rem_euclid(1.0)))
            .collect();
        (u0, ut)
    });
    let (u0, ut): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    let shape = [n_samples, resolution, 1];
    Ok(DatasetBundle {
        inputs: Tensor::new(u0.concat(), &shape).expect("shape"),
        outputs: Tensor::new(ut.concat(), &shape).expect("shape"),
        grid: grid1d(&xs),
        n_train: default_n_train(n_samples),
        problem: "advection".into(),
        seed,
        params: serde_json::json!({
            "case": "I",
            "resolution": resolution,
            "t_final": t_final,
            "speed": 1.0,
            "sharpness": "2/omega",
        }),
    })
}

/// Case II: `u₀ ↦ u(x, t)` on an `nt × nx` grid with `t_k = k·dt`.
/// Tensors are `[n, nt, nx, 1]` and the input repeats `u₀` along time.
pub fn gen_advection_space_time(n_samples: usize, nx: usize, nt: usize, dt: f64, seed: u64) -> Result<DatasetBundle> {
    check(n_samples, nx)?;
    if nt < 2 || dt <= 0.0 {
        return Err(DataError::Invalid(format!("need nt >= 2 and dt > 0, got nt={nt}, dt={dt}")));
    }
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 / nx as f64).collect();
    let ts: Vec<f64> = (0..nt).map(|k| k as f64 * dt).collect();
    let samples = par::map_range(n_samples, |i| {
        let p = AdvectionParams::sample(&mut Stream::new(seed, "advection", i as u64));
        let u0: Vec<f64> = xs.iter().map(|&x| advection_initial(&p, x)).collect();
        let mut input = Vec::with_capacity(nt * nx);
        let mut output = Vec::with_capacity(nt * nx);
        for &t in &ts {
            input.extend_from_slice(&u0);
            output.extend(xs.iter().map(|&x| advection_initial(&p, (x - t).rem_euclid(1.0))));
        }
        (input, output)
    });
    let (a, u): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    let shape = [n_samples, nt, nx, 1];
    Ok(DatasetBundle {
        inputs: Tensor::new(a.concat(), &shape).expect("shape"),
        outputs: Tensor::new(u.concat(), &shape).expect("shape"),
        grid: grid2d(&ts, &xs),
        n_train: default_n_train(n_samples),
        problem: "advection-space-time".into(),
        seed,
        params: serde_json::json!({
            "case": "II",
            "nx": nx,
            "nt": nt,
            "dt": dt,
            "speed": 1.0,
            "sharpness": "2/omega",
        }),
    })
}
