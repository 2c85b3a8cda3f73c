//! Relative-L2 loss, Adam, the step-decay schedule and the training loop.

mod adam;
mod metrics;

pub use adam::Adam;
pub use metrics::{EpochRecord, MetricHistory, CSV_HEADER};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::container::Record;
use crate::data::{DatasetBundle, Split};
use crate::model::{save_checkpoint, ModelError, Operator, SavedModel, UwnoModel};
use crate::rng::Stream;
use crate::tensor::{no_grad, Tensor, TensorError};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("sample {index} has an all-zero target; relative error is undefined")]
    ZeroTarget { index: usize },
    #[error("cannot evaluate an empty split")]
    EmptySplit,
    #[error("non-finite {what} in epoch {epoch}, batch {batch}")]
    NonFinite { what: String, epoch: usize, batch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, TrainError>;

fn default_epochs() -> usize {
    500
}
fn default_batch_size() -> usize {
    20
}
fn default_lr0() -> f64 {
    1e-3
}
fn default_decay_factor() -> f64 {
    0.5
}
fn default_decay_every() -> usize {
    50
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_lr0")]
    pub lr0: f64,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
    #[serde(default = "default_decay_every")]
    pub decay_every: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Write a checkpoint every this many epochs (0: only at the end).
    #[serde(default)]
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            lr0: default_lr0(),
            decay_factor: default_decay_factor(),
            decay_every: default_decay_every(),
            seed: 0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor <= 1.0) {
            return fail("decay_factor must lie in (0, 1]");
        }
        if self.decay_every == 0 {
            return fail("decay_every must be at least 1");
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return fail("lr0 must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return fail("Adam needs 0 <= beta1, beta2 < 1 and eps > 0");
        }
        Ok(())
    }
}

/// `lr0 · decay_factor^⌊epoch / decay_every⌋`, with `epoch` counted from 0.
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> f64 {
    let steps = (epoch / cfg.decay_every) as i32;
    cfg.lr0 * cfg.decay_factor.powi(steps)
}

fn target_norms(target: &Tensor) -> Result<Vec<f64>> {
    let b = target.shape().first().copied().unwrap_or(0);
    let per = target.numel() / b.max(1);
    target
        .data()
        .chunks(per.max(1))
        .enumerate()
        .map(|(i, row)| {
            let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                Ok(n)
            } else {
                Err(TrainError::ZeroTarget { index: i })
            }
        })
        .collect()
}

/// Mean over the batch of `‖û_i − u_i‖₂ / ‖u_i‖₂` (differentiable in `pred`).
pub fn relative_l2(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.shape() != target.shape() || pred.ndim() == 0 {
        return Err(TensorError::ShapeMismatch {
            op: "relative_l2",
            lhs: pred.shape().to_vec(),
            rhs: target.shape().to_vec(),
        }
        .into());
    }
    let b = pred.shape()[0];
    let norms = target_norms(target)?;
    let diff = pred.sub(target)?.reshape(&[b, pred.numel() / b.max(1)])?;
    let num = diff.square().sum_axis(1, false)?.sqrt();
    Ok(num.div(&Tensor::new(norms, &[b])?)?.mean())
}

/// Per-sample relative errors, computed without tracking.
pub fn per_sample_relative_l2(pred: &Tensor, target: &Tensor) -> Result<Vec<f64>> {
    if pred.shape() != target.shape() || pred.ndim() == 0 {
        return Err(TensorError::ShapeMismatch {
            op: "relative_l2",
            lhs: pred.shape().to_vec(),
            rhs: target.shape().to_vec(),
        }
        .into());
    }
    let norms = target_norms(target)?;
    let per = pred.numel() / pred.shape()[0].max(1);
    Ok(pred
        .data()
        .chunks(per.max(1))
        .zip(target.data().chunks(per.max(1)))
        .zip(norms)
        .map(|((p, t), n)| p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / n)
        .collect())
}

/// Copies the samples at `idx` (leading axis) into a new untracked tensor.
pub fn gather_samples(t: &Tensor, idx: &[usize]) -> Tensor {
    let per = t.numel() / t.shape()[0].max(1);
    let mut data = Vec::with_capacity(idx.len() * per);
    for &i in idx {
        data.extend_from_slice(&t.data()[i * per..(i + 1) * per]);
    }
    let mut shape = t.shape().to_vec();
    shape[0] = idx.len();
    Tensor::new(data, &shape).expect("gathered shape")
}

/// Per-sample relative errors of `model` over `split`, in sample order.
pub fn evaluate_per_sample(model: &dyn Operator, split: &Split, batch_size: usize) -> Result<Vec<f64>> {
    if split.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let batch_size = batch_size.max(1);
    let n = split.len();
    let mut errors = Vec::with_capacity(n);
    no_grad(|| -> Result<()> {
        for start in (0..n).step_by(batch_size) {
            let len = batch_size.min(n - start);
            let x = split.inputs.narrow(0, start, len)?;
            let y = split.outputs.narrow(0, start, len)?;
            let pred = model.predict(&x, &split.grid)?;
            errors.extend(per_sample_relative_l2(&pred, &y)?);
        }
        Ok(())
    })?;
    Ok(errors)
}

/// Mean relative-L2 error of `model` over `split`.
pub fn evaluate(model: &dyn Operator, split: &Split, batch_size: usize) -> Result<f64> {
    let errors = evaluate_per_sample(model, split, batch_size)?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Where training writes its artefacts. All fields are optional.
#[derive(Clone, Debug, Default)]
pub struct TrainOutputs {
    /// Metrics CSV, rewritten after every epoch.
    pub metrics_csv: Option<PathBuf>,
    /// Checkpoint path, written at the end and every `checkpoint_every` epochs.
    pub checkpoint: Option<PathBuf>,
    /// Extra records stored in every checkpoint.
    pub checkpoint_extra: Vec<Record>,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> TrainError + '_ {
    move |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_checkpoint(model: &UwnoModel, cfg: &TrainConfig, out: &TrainOutputs) -> Result<()> {
    let Some(path) = &out.checkpoint else {
        return Ok(());
    };
    let mut extra = vec![Record::text(
        "train_config",
        &serde_json::to_string(cfg).expect("config serializes"),
    )];
    extra.extend(out.checkpoint_extra.iter().cloned());
    save_checkpoint(path, &SavedModel::Uwno(model.clone()), &extra)?;
    Ok(())
}

/// Trains `model` on the training split with seeded shuffling, evaluating
/// on the test split after every epoch.
///
/// `train_rel_l2` in the history is the mean loss over the epoch's
/// mini-batches, weighted by batch size. A non-finite loss or gradient
/// aborts with [`TrainError::NonFinite`]; metrics written so far and the
/// last periodic checkpoint are left in place.
pub fn train(model: &mut UwnoModel, data: &DatasetBundle, cfg: &TrainConfig, out: &TrainOutputs) -> Result<MetricHistory> {
    cfg.validate()?;
    let train_split = data.train_split();
    let test_split = data.test_split();
    let mut history = MetricHistory::default();
    let mut csv = match &out.metrics_csv {
        Some(p) => {
            let mut f = std::fs::File::create(p).map_err(io_error(p))?;
            writeln!(f, "{CSV_HEADER}").map_err(io_error(p))?;
            Some((f, p.clone()))
        }
        None => None,
    };
    let mut adam = Adam::new(model.params(), cfg);
    let n = train_split.len();
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let lr = lr_at(epoch, cfg);
        let mut order: Vec<usize> = (0..n).collect();
        Stream::new(cfg.seed, "shuffle", epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch, idx) in order.chunks(cfg.batch_size).enumerate() {
            let x = gather_samples(&train_split.inputs, idx);
            let y = gather_samples(&train_split.outputs, idx);
            let loss = relative_l2(&model.forward(&x, &train_split.grid)?, &y)?;
            let value = loss.item()?;
            if !value.is_finite() {
                return Err(TrainError::NonFinite {
                    what: "loss".into(),
                    epoch: epoch + 1,
                    batch,
                });
            }
            loss.backward()?;
            adam.step(model.params_mut(), lr).map_err(|name| TrainError::NonFinite {
                what: format!("gradient of {name}"),
                epoch: epoch + 1,
                batch,
            })?;
            loss_sum += value * idx.len() as f64;
        }
        let test = evaluate(&*model, &test_split, cfg.batch_size)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_rel_l2: loss_sum / n as f64,
            test_rel_l2: test,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        if let Some((f, p)) = csv.as_mut() {
            writeln!(f, "{}", record.csv_row()).map_err(io_error(p))?;
            f.flush().map_err(io_error(p))?;
        }
        if out.verbose {
            eprintln!(
                "epoch {:>4}  train {:.6}  test {:.6}  lr {:.2e}  {:.1}s",
                record.epoch, record.train_rel_l2, record.test_rel_l2, record.lr, record.seconds
            );
        }
        history.push(record);
        if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
            write_checkpoint(model, cfg, out)?;
        }
    }
    write_checkpoint(model, cfg, out)?;
    Ok(history)
}
