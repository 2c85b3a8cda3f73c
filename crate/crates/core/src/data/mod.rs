//! Synthetic PDE datasets and the binary container format.

mod advection;
mod burgers;
pub mod container;
mod export;
mod poisson;

pub use advection::{advection_initial, gen_advection, gen_advection_space_time, AdvectionParams};
pub use burgers::{burgers_oracle_step, gen_burgers, grf_initial_condition, solve_burgers, BurgersSolver};
pub use export::{field_csv, write_field_csv};
pub use poisson::{gen_poisson, poisson_source, poisson_solution};

use std::path::Path;

use container::{container_read, container_write, find, ContainerError, Record};

use crate::tensor::Tensor;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("invalid generator argument: {0}")]
    Invalid(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Inputs, outputs and grid of a generated problem. The first `n_train`
/// samples form the training split, the rest the test split.
#[derive(Clone, Debug)]
pub struct DatasetBundle {
    /// `[N, spatial.., d_a]`.
    pub inputs: Tensor,
    /// `[N, spatial.., d_u]`.
    pub outputs: Tensor,
    /// `[spatial.., dims]` physical coordinates.
    pub grid: Tensor,
    pub n_train: usize,
    pub problem: String,
    pub seed: u64,
    /// Generator parameters as JSON.
    pub params: serde_json::Value,
}

/// A contiguous range of samples with the shared grid.
#[derive(Clone, Debug)]
pub struct Split {
    pub inputs: Tensor,
    pub outputs: Tensor,
    pub grid: Tensor,
}

impl Split {
    pub fn len(&self) -> usize {
        self.inputs.shape().first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl DatasetBundle {
    pub fn n_samples(&self) -> usize {
        self.inputs.shape()[0]
    }

    pub fn n_test(&self) -> usize {
        self.n_samples() - self.n_train
    }

    /// Spatial extents shared by inputs and outputs.
    pub fn resolution(&self) -> Vec<usize> {
        let s = self.inputs.shape();
        s[1..s.len() - 1].to_vec()
    }

    fn split(&self, start: usize, len: usize) -> Split {
        Split {
            inputs: self.inputs.narrow(0, start, len).expect("split within bounds"),
            outputs: self.outputs.narrow(0, start, len).expect("split within bounds"),
            grid: self.grid.clone(),
        }
    }

    pub fn train_split(&self) -> Split {
        self.split(0, self.n_train)
    }

    pub fn test_split(&self) -> Split {
        self.split(self.n_train, self.n_test())
    }

    /// Checks split sizes, matching shapes and a strictly increasing grid.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DataError::Malformed(m));
        let (si, so, sg) = (self.inputs.shape(), self.outputs.shape(), self.grid.shape());
        if si.len() < 3 || so.len() != si.len() || si[..si.len() - 1] != so[..so.len() - 1] {
            return bad(format!("inputs {si:?} and outputs {so:?} disagree"));
        }
        let dims = si.len() - 2;
        if sg.len() != dims + 1 || sg[..dims] != si[1..=dims] || sg[dims] != dims {
            return bad(format!("grid {sg:?} does not match inputs {si:?}"));
        }
        if self.n_train == 0 || self.n_train >= si[0] {
            return bad(format!("n_train {} leaves an empty split of {}", self.n_train, si[0]));
        }
        // Coordinate `d` must increase strictly along spatial axis `d`.
        let g = self.grid.data();
        let spatial = &si[1..=dims];
        for d in 0..dims {
            let stride: usize = spatial[d + 1..].iter().product::<usize>() * dims;
            for i in 1..spatial[d] {
                if g[i * stride + d] <= g[(i - 1) * stride + d] {
                    return bad(format!("grid coordinate {d} is not strictly increasing"));
                }
            }
        }
        Ok(())
    }

    pub fn to_records(&self) -> Vec<Record> {
        vec![
            Record::f64("inputs", self.inputs.shape(), self.inputs.to_vec()),
            Record::f64("outputs", self.outputs.shape(), self.outputs.to_vec()),
            Record::f64("grid", self.grid.shape(), self.grid.to_vec()),
            Record::scalar_i64("n_train", self.n_train as i64),
            Record::scalar_i64("seed", self.seed as i64),
            Record::text("problem", &self.problem),
            Record::text("params", &self.params.to_string()),
        ]
    }

    pub fn from_records(records: &[Record]) -> Result<DatasetBundle> {
        let tensor = |name: &str| -> Result<Tensor> {
            let r = find(records, name)?;
            Tensor::new(r.as_f64()?.to_vec(), &r.shape).map_err(|e| DataError::Malformed(format!("{name}: {e}")))
        };
        let n_train = find(records, "n_train")?.as_scalar_i64()?;
        let params = find(records, "params")?.as_text()?;
        let bundle = DatasetBundle {
            inputs: tensor("inputs")?,
            outputs: tensor("outputs")?,
            grid: tensor("grid")?,
            n_train: usize::try_from(n_train).map_err(|_| DataError::Malformed(format!("n_train {n_train}")))?,
            problem: find(records, "problem")?.as_text()?,
            seed: find(records, "seed")?.as_scalar_i64()? as u64,
            params: serde_json::from_str(&params).map_err(|e| DataError::Malformed(format!("params: {e}")))?,
        };
        bundle.validate()?;
        Ok(bundle)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        container_write(path, &self.to_records())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<DatasetBundle> {
        DatasetBundle::from_records(&container_read(path)?)
    }
}

/// `n` points `lo + i·(hi-lo)/(n-1)`, endpoints included.
pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Coordinates of a tensor-product grid as `[n0, n1, 2]`.
pub(crate) fn grid2d(xs: &[f64], ys: &[f64]) -> Tensor {
    let mut g = Vec::with_capacity(xs.len() * ys.len() * 2);
    for &x in xs {
        for &y in ys {
            g.extend([x, y]);
        }
    }
    Tensor::new(g, &[xs.len(), ys.len(), 2]).expect("grid shape")
}

/// Coordinates of a 1-D grid as `[n, 1]`.
pub(crate) fn grid1d(xs: &[f64]) -> Tensor {
    Tensor::new(xs.to_vec(), &[xs.len(), 1]).expect("grid shape")
}

/// Default split: 80% train, at least one sample on each side.
pub(crate) fn default_n_train(n: usize) -> usize {
    (n * 4 / 5).clamp(1, n - 1)
}

/// `sin 2x + sin 7x + sin 16x`, the spectral-bias regression target.
pub fn spectral_bias_target(x: &Tensor) -> Tensor {
    let data = x
        .data()
        .iter()
        .map(|&v| (2.0 * v).sin() + (7.0 * v).sin() + (16.0 * v).sin())
        .collect();
    Tensor::new(data, x.shape()).expect("same shape")
}
