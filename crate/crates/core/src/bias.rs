//! Spectral-bias experiment: a tanh FNN fitted to `sin 2x + sin 7x + sin 16x`
//! on `[−π, π)`, with or without adaptive activation slopes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::data::spectral_bias_target;
use crate::model::ParamStore;
use crate::plot::{line_svg, PlotError, Series};
use crate::rng::Stream;
use crate::tensor::{no_grad, Tensor, TensorError};
use crate::train::{Adam, TrainConfig};

/// Frequencies whose residual magnitude is tracked.
pub const FREQUENCIES: [usize; 3] = [2, 7, 16];

#[derive(Clone, Debug, PartialEq)]
pub struct BiasConfig {
    /// Use `tanh(n·a·x)` with one trainable `a` per hidden layer.
    pub adaptive: bool,
    /// Full-batch Adam steps.
    pub epochs: usize,
    pub seed: u64,
    pub points: usize,
    pub hidden: usize,
    pub depth: usize,
    pub lr: f64,
    /// Fixed scale `n`; slopes start at `1/n`.
    pub slope_scale: usize,
    pub record_every: usize,
    /// Keep the slopes at their initial value (for equivalence checks).
    pub freeze_slopes: bool,
}

impl Default for BiasConfig {
    fn default() -> BiasConfig {
        BiasConfig {
            adaptive: false,
            epochs: 3_000,
            seed: 0,
            points: 256,
            hidden: 64,
            depth: 4,
            lr: 1e-3,
            slope_scale: 10,
            record_every: 100,
            freeze_slopes: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BiasError {
    #[error("invalid bias-demo configuration: {0}")]
    Invalid(String),
    #[error("non-finite gradient in {0}")]
    NonFinite(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Plot(#[from] PlotError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasRecord {
    pub epoch: usize,
    pub loss: f64,
    /// Residual magnitude at each of [`FREQUENCIES`].
    pub residual: [f64; 3],
}

#[derive(Clone, Debug)]
pub struct BiasOutcome {
    pub records: Vec<BiasRecord>,
    pub x: Vec<f64>,
    pub target: Vec<f64>,
    /// Network output after the last epoch.
    pub prediction: Vec<f64>,
    /// Final `n·a` per hidden layer (empty when not adaptive).
    pub slopes: Vec<f64>,
}

/// `n` points `−π + 2πj/n`, right endpoint excluded.
pub fn bias_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
}

/// `(2/N)·|Σ r_j e^{−ikx_j}|` for each `k`; a unit sine at frequency `k`
/// on a uniform periodic grid gives exactly 1.
pub fn residual_spectrum(residual: &[f64], x: &[f64], freqs: &[usize]) -> Vec<f64> {
    let n = residual.len() as f64;
    freqs
        .iter()
        .map(|&k| {
            let (re, im) = residual.iter().zip(x).fold((0.0, 0.0), |(re, im), (&r, &xj)| {
                let phase = k as f64 * xj;
                (re + r * phase.cos(), im - r * phase.sin())
            });
            2.0 * re.hypot(im) / n
        })
        .collect()
}

struct Fnn {
    params: ParamStore,
    /// Slot of the slope for each hidden layer, if adaptive.
    slopes: Vec<Option<usize>>,
    scale: f64,
}

impl Fnn {
    /// Glorot-normal weights and zero biases from per-layer streams.
    fn new(cfg: &BiasConfig) -> Fnn {
        let mut params = ParamStore::default();
        let mut slopes = Vec::new();
        let widths: Vec<usize> = std::iter::once(1)
            .chain(std::iter::repeat_n(cfg.hidden, cfg.depth))
            .chain(std::iter::once(1))
            .collect();
        for (i, w) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let std = (2.0 / (fan_in + fan_out) as f64).sqrt();
            let mut s = Stream::new(cfg.seed, "bias-demo", i as u64);
            let weight = (0..fan_in * fan_out).map(|_| std * s.normal()).collect();
            params.push(format!("fc{i}.weight"), Tensor::param(weight, &[fan_in, fan_out]).expect("shape"));
            params.push(format!("fc{i}.bias"), Tensor::param(vec![0.0; fan_out], &[1, fan_out]).expect("shape"));
            if i < cfg.depth {
                slopes.push(cfg.adaptive.then(|| {
                    let a = Tensor::param(vec![1.0 / cfg.slope_scale as f64], &[1]).expect("scalar");
                    params.push(format!("fc{i}.slope"), a)
                }));
            }
        }
        Fnn {
            params,
            slopes,
            scale: cfg.slope_scale as f64,
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        let mut h = x.clone();
        let hidden = self.slopes.len();
        for i in 0..=hidden {
            let w = self.params.by_name(&format!("fc{i}.weight")).expect("weight");
            let b = self.params.by_name(&format!("fc{i}.bias")).expect("bias");
            let z = h.matmul(w)?.add(b)?;
            h = match self.slopes.get(i) {
                None => z,
                Some(None) => z.tanh(),
                Some(Some(slot)) => z.mul(&self.params.get(*slot).scale(self.scale))?.tanh(),
            };
        }
        Ok(h)
    }

    fn slope_values(&self) -> Vec<f64> {
        self.slopes
            .iter()
            .flatten()
            .map(|&s| self.params.get(s).data()[0] * self.scale)
            .collect()
    }
}

/// Trains the network with full-batch Adam on the mean squared error,
/// recording the residual spectrum every `record_every` epochs (epoch 0
/// is the untrained network).
pub fn run_bias_demo(cfg: &BiasConfig) -> Result<BiasOutcome, BiasError> {
    if cfg.points < 2 * FREQUENCIES[2] + 1 || cfg.hidden == 0 || cfg.depth == 0 || cfg.record_every == 0 {
        return Err(BiasError::Invalid(format!(
            "need points > {}, hidden > 0, depth > 0 and record_every > 0",
            2 * FREQUENCIES[2]
        )));
    }
    if !(cfg.lr > 0.0) || cfg.slope_scale == 0 {
        return Err(BiasError::Invalid("lr and slope_scale must be positive".into()));
    }
    let xs = bias_grid(cfg.points);
    let x = Tensor::new(xs.clone(), &[cfg.points, 1])?;
    let y = spectral_bias_target(&x);
    let target = y.to_vec();
    let mut net = Fnn::new(cfg);
    let frozen: Vec<(usize, Tensor)> = if cfg.freeze_slopes {
        net.slopes.iter().flatten().map(|&s| (s, net.params.get(s).clone())).collect()
    } else {
        Vec::new()
    };
    let mut adam = Adam::new(&net.params, &TrainConfig::default());
    let mut records = Vec::new();
    for epoch in 0..=cfg.epochs {
        let pred = net.forward(&x)?;
        let loss = pred.sub(&y)?.square().mean();
        if epoch % cfg.record_every == 0 || epoch == cfg.epochs {
            let residual: Vec<f64> = target.iter().zip(pred.data().iter()).map(|(t, p)| t - p).collect();
            let r = residual_spectrum(&residual, &xs, &FREQUENCIES);
            records.push(BiasRecord {
                epoch,
                loss: loss.item()?,
                residual: [r[0], r[1], r[2]],
            });
        }
        if epoch == cfg.epochs {
            break;
        }
        loss.backward()?;
        adam.step(&mut net.params, cfg.lr).map_err(BiasError::NonFinite)?;
        for (slot, t) in &frozen {
            net.params.replace(*slot, t.clone());
        }
    }
    let prediction = no_grad(|| net.forward(&x))?.to_vec();
    Ok(BiasOutcome {
        records,
        x: xs,
        target,
        prediction,
        slopes: net.slope_values(),
    })
}

impl BiasOutcome {
    /// First recorded epoch at which the residual at `FREQUENCIES[k]` is
    /// below `threshold`.
    pub fn epochs_to_threshold(&self, k: usize, threshold: f64) -> Option<usize> {
        self.records.iter().find(|r| r.residual[k] < threshold).map(|r| r.epoch)
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = String::from("epoch,loss,freq2,freq7,freq16\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{:?},{:?},{:?},{:?}",
                r.epoch, r.loss, r.residual[0], r.residual[1], r.residual[2]
            )
            .expect("write to string");
        }
        out
    }

    pub fn fit_csv(&self) -> String {
        let mut out = String::from("x,target,prediction\n");
        for ((x, t), p) in self.x.iter().zip(&self.target).zip(&self.prediction) {
            writeln!(out, "{x:?},{t:?},{p:?}").expect("write to string");
        }
        out
    }

    pub fn fit_svg(&self, title: &str) -> Result<String, BiasError> {
        let series = [
            Series {
                label: "target".into(),
                points: self.x.iter().copied().zip(self.target.iter().copied()).collect(),
            },
            Series {
                label: "prediction".into(),
                points: self.x.iter().copied().zip(self.prediction.iter().copied()).collect(),
            },
        ];
        Ok(line_svg(title, "x", "f(x)", &series)?)
    }

    pub fn spectrum_svg(&self, title: &str) -> Result<String, BiasError> {
        let series: Vec<Series> = FREQUENCIES
            .iter()
            .enumerate()
            .map(|(k, f)| Series {
                label: format!("k = {f}"),
                points: self.records.iter().map(|r| (r.epoch as f64, r.residual[k])).collect(),
            })
            .collect();
        Ok(line_svg(title, "epoch", "residual magnitude", &series)?)
    }
}
