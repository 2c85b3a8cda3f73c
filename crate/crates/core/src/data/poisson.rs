use std::f64::consts::PI;

use super::{default_n_train, grid2d, linspace, DataError, DatasetBundle, Result};
use crate::par;
use crate::rng::Stream;
use crate::tensor::Tensor;

/// `u = α sin(πx)(1 + cos πy) + β sin(2πx)(1 − cos 2πy)`.
pub fn poisson_solution(alpha: f64, beta: f64, x: f64, y: f64) -> f64 {
    alpha * (PI * x).sin() * (1.0 + (PI * y).cos()) + beta * (2.0 * PI * x).sin() * (1.0 - (2.0 * PI * y).cos())
}

/// The Laplacian of [`poisson_solution`].
pub fn poisson_source(alpha: f64, beta: f64, x: f64, y: f64) -> f64 {
    let (sx, cy) = ((PI * x).sin(), (PI * y).cos());
    let (s2x, c2y) = ((2.0 * PI * x).sin(), (2.0 * PI * y).cos());
    -alpha * PI * PI * (cy * sx + sx * (cy + 1.0)) + 4.0 * beta * PI * PI * (s2x * c2y + s2x * (c2y - 1.0))
}

/// Source-to-solution pairs on `[-1, 1]²` with `α, β ~ U[-2, 2]`.
/// Inputs and outputs are `[n, res, res, 1]`; axis 1 is `x`, axis 2 is `y`.
pub fn gen_poisson(n_samples: usize, resolution: usize, seed: u64) -> Result<DatasetBundle> {
    if resolution < 8 {
        return Err(DataError::Invalid(format!("poisson resolution must be >= 8, got {resolution}")));
    }
    if n_samples < 2 {
        return Err(DataError::Invalid(format!("need at least 2 samples, got {n_samples}")));
    }
    let xs = linspace(-1.0, 1.0, resolution);
    let plane = resolution * resolution;
    let samples = par::map_range(n_samples, |i| {
        let mut s = Stream::new(seed, "poisson", i as u64);
        let alpha = s.uniform_in(-2.0, 2.0);
        let beta = s.uniform_in(-2.0, 2.0);
        let mut f = Vec::with_capacity(plane);
        let mut u = Vec::with_capacity(plane);
        for &x in &xs {
            for &y in &xs {
                f.push(poisson_source(alpha, beta, x, y));
                u.push(poisson_solution(alpha, beta, x, y));
            }
        }
        (f, u)
    });
    let (f, u): (Vec<_>, Vec<_>) = samples.into_iter().unzip();
    let shape = [n_samples, resolution, resolution, 1];
    Ok(DatasetBundle {
        inputs: Tensor::new(f.concat(), &shape).expect("shape"),
        outputs: Tensor::new(u.concat(), &shape).expect("shape"),
        grid: grid2d(&xs, &xs),
        n_train: default_n_train(n_samples),
        problem: "poisson".into(),
        seed,
        params: serde_json::json!({
            "resolution": resolution,
            "domain": [-1.0, 1.0],
            "alpha_range": [-2.0, 2.0],
            "beta_range": [-2.0, 2.0],
        }),
    })
}
