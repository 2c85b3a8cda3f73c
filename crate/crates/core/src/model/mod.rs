//! The U-Net enhanced wavelet neural operator.
//!
//! Public tensors are channels-last (`[B, N, d]` or `[B, H, W, d]`).
//! Internally the layer stack runs channels-first so the wavelet
//! transforms and convolutions act on trailing spatial axes.

mod checkpoint;
mod kernel;
mod params;
mod unet;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, SavedModel};
pub use kernel::{band_count, wavelet_kernel_conv};
pub use params::ParamStore;
pub use unet::{unet_kernel_shapes, unet_path, UnetWeights};

use serde::{Deserialize, Serialize};

use crate::data::container::ContainerError;
use crate::rng::Stream;
use crate::tensor::{PaddingMode, Tensor, TensorError};
use crate::wavelet::{coarsest_len, WaveletError, WaveletFilter};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[serde(alias = "GELU")]
    Gelu,
    #[serde(alias = "MISH")]
    Mish,
}

impl Activation {
    pub fn apply(self, x: &Tensor) -> Tensor {
        match self {
            Activation::Gelu => x.gelu(),
            Activation::Mish => x.mish(),
        }
    }
}

fn default_spatial_dims() -> usize {
    1
}
fn default_width() -> usize {
    64
}
fn default_proj_dim() -> usize {
    128
}
fn default_layers() -> usize {
    4
}
fn default_wavelet() -> String {
    "db4".into()
}
fn default_level() -> usize {
    3
}
fn default_activation() -> Activation {
    Activation::Gelu
}
fn default_slope_scale() -> usize {
    10
}
fn default_channels() -> usize {
    1
}
fn default_unet_padding() -> PaddingMode {
    PaddingMode::Zero
}

/// Network hyperparameters. Every field has a default except `resolution`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UwnoConfig {
    /// 1 or 2.
    #[serde(default = "default_spatial_dims")]
    pub spatial_dims: usize,
    /// Grid extents, one per spatial axis. Sizes the wavelet weights.
    pub resolution: Vec<usize>,
    /// Channel width `d_v` of the layer stack.
    #[serde(default = "default_width")]
    pub width: usize,
    /// Hidden width `d_r` of the projection.
    #[serde(default = "default_proj_dim")]
    pub proj_dim: usize,
    #[serde(default = "default_layers")]
    pub layers: usize,
    #[serde(default = "default_wavelet")]
    pub wavelet: String,
    #[serde(default = "default_level")]
    pub level: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// Fixed scale `n` of the adaptive slope `n·a`.
    #[serde(default = "default_slope_scale")]
    pub slope_scale: usize,
    /// `[c1, c2]` channel plan of the U-Net; defaults to `[width, 2·width]`.
    #[serde(default)]
    pub unet_channels: Option<Vec<usize>>,
    /// Boundary handling of the U-Net convolutions.
    #[serde(default = "default_unet_padding")]
    pub unet_padding: PaddingMode,
    #[serde(default = "default_channels")]
    pub in_channels: usize,
    #[serde(default = "default_channels")]
    pub out_channels: usize,
    /// Plain wavelet operator: no U-Net path, no residual shortcut, no slope.
    #[serde(default)]
    pub baseline_wno: bool,
}

impl UwnoConfig {
    /// Defaults for the given grid.
    pub fn for_resolution(resolution: &[usize]) -> UwnoConfig {
        UwnoConfig {
            spatial_dims: resolution.len(),
            resolution: resolution.to_vec(),
            width: default_width(),
            proj_dim: default_proj_dim(),
            layers: default_layers(),
            wavelet: default_wavelet(),
            level: default_level(),
            activation: default_activation(),
            slope_scale: default_slope_scale(),
            unet_channels: None,
            unet_padding: default_unet_padding(),
            in_channels: 1,
            out_channels: 1,
            baseline_wno: false,
        }
    }

    pub fn unet_plan(&self) -> (usize, usize) {
        match self.unet_channels.as_deref() {
            Some([c1, c2]) => (*c1, *c2),
            _ => (self.width, 2 * self.width),
        }
    }

    /// Coarsest-band extents per spatial axis.
    pub fn zeta(&self) -> Vec<usize> {
        self.resolution.iter().map(|&n| coarsest_len(n, self.level)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ModelError::Config(m));
        if !(1..=2).contains(&self.spatial_dims) {
            return fail(format!("spatial_dims must be 1 or 2, got {}", self.spatial_dims));
        }
        if self.resolution.len() != self.spatial_dims {
            return fail(format!(
                "resolution {:?} does not have {} entries",
                self.resolution, self.spatial_dims
            ));
        }
        for (name, v) in [
            ("layers", self.layers),
            ("level", self.level),
            ("slope_scale", self.slope_scale),
            ("width", self.width),
            ("proj_dim", self.proj_dim),
            ("in_channels", self.in_channels),
            ("out_channels", self.out_channels),
        ] {
            if v == 0 {
                return fail(format!("{name} must be at least 1"));
            }
        }
        if let Some(plan) = &self.unet_channels {
            if plan.len() != 2 || plan.contains(&0) {
                return fail(format!("unet_channels must be two positive sizes, got {plan:?}"));
            }
        }
        let filter = WaveletFilter::by_name(&self.wavelet)?;
        for &n in &self.resolution {
            if n < 4 && !self.baseline_wno {
                return fail(format!("resolution {n} is below the U-Net minimum of 4"));
            }
            // Probe the transform contract once so bad combinations fail early.
            crate::wavelet::dwt1d(&Tensor::zeros(&[n]), &filter, self.level)?;
        }
        Ok(())
    }
}

/// Anything that maps an input field to a predicted output field.
pub trait Operator {
    /// `input`: `[B, spatial.., d_a]`; `grid`: `[spatial.., dims]` or
    /// `[B, spatial.., dims]`. Returns `[B, spatial.., d_u]`.
    fn predict(&self, input: &Tensor, grid: &Tensor) -> Result<Tensor>;
}

#[derive(Clone, Debug)]
struct LayerSlots {
    r: usize,
    w: usize,
    w_bias: usize,
    unet: Option<[usize; 10]>,
    slope: Option<usize>,
}

/// A U-WNO network with its parameters.
#[derive(Clone, Debug)]
pub struct UwnoModel {
    config: UwnoConfig,
    filter: WaveletFilter,
    params: ParamStore,
    lift: [usize; 4],
    layers: Vec<LayerSlots>,
    proj: [usize; 4],
}

fn uniform(shape: &[usize], bound: f64, seed: u64, index: u64) -> Tensor {
    let mut s = Stream::new(seed, "init", index);
    let n = shape.iter().product();
    let data = (0..n).map(|_| s.uniform_in(-bound, bound)).collect();
    Tensor::param(data, shape).expect("shape and data agree")
}

/// `1/n`, nudged by an ulp if needed so that `n · a` is exactly 1.
fn unit_slope(n: usize) -> f64 {
    let nf = n as f64;
    let a = 1.0 / nf;
    [a, a.next_up(), a.next_down()]
        .into_iter()
        .find(|&c| nf * c == 1.0)
        .unwrap_or(a)
}

impl UwnoModel {
    /// Initializes a model. Dense and convolution weights and biases are
    /// uniform in `±1/√fan_in`, wavelet weights uniform in `±1/d_v²`,
    /// slopes `1/n`.
    pub fn new(config: &UwnoConfig, seed: u64) -> Result<UwnoModel> {
        config.validate()?;
        let cfg = config.clone();
        let filter = WaveletFilter::by_name(&cfg.wavelet)?;
        let dims = cfg.spatial_dims;
        let wv = cfg.width;
        let mut params = ParamStore::default();
        let add = |params: &mut ParamStore, name: String, shape: Vec<usize>, bound: f64| {
            let index = params.len() as u64;
            params.push(name, uniform(&shape, bound, seed, index))
        };
        let inv_sqrt = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();

        let lift_in = cfg.in_channels + dims;
        let lift = [
            add(&mut params, "lift.fc1.weight".into(), vec![lift_in, wv], inv_sqrt(lift_in)),
            add(&mut params, "lift.fc1.bias".into(), vec![wv], inv_sqrt(lift_in)),
            add(&mut params, "lift.fc2.weight".into(), vec![wv, wv], inv_sqrt(wv)),
            add(&mut params, "lift.fc2.bias".into(), vec![wv], inv_sqrt(wv)),
        ];
        let (c1, c2) = cfg.unet_plan();
        let mut r_shape = vec![band_count(dims)];
        r_shape.extend(cfg.zeta());
        r_shape.extend([wv, wv]);
        let mut layers = Vec::new();
        for j in 0..cfg.layers {
            let r = add(&mut params, format!("layer{j}.kernel.r"), r_shape.clone(), 1.0 / (wv * wv) as f64);
            let w = add(&mut params, format!("layer{j}.pointwise.weight"), vec![wv, wv], inv_sqrt(wv));
            let w_bias = add(&mut params, format!("layer{j}.pointwise.bias"), vec![wv], inv_sqrt(wv));
            let mut unet = None;
            let mut slope = None;
            if !cfg.baseline_wno {
                let mut slots = [0; 10];
                for (i, (name, shape)) in unet::unet_kernel_shapes(wv, c1, c2, dims).into_iter().enumerate() {
                    let fan_in = shape[1..].iter().product();
                    let out = shape[0];
                    slots[2 * i] = add(&mut params, format!("layer{j}.unet.{name}.weight"), shape, inv_sqrt(fan_in));
                    slots[2 * i + 1] = add(&mut params, format!("layer{j}.unet.{name}.bias"), vec![out], inv_sqrt(fan_in));
                }
                unet = Some(slots);
                let a = Tensor::param(vec![unit_slope(cfg.slope_scale)], &[1]).expect("scalar");
                slope = Some(params.push(format!("layer{j}.slope"), a));
            }
            layers.push(LayerSlots {
                r,
                w,
                w_bias,
                unet,
                slope,
            });
        }
        let proj = [
            add(&mut params, "proj.fc1.weight".into(), vec![wv, cfg.proj_dim], inv_sqrt(wv)),
            add(&mut params, "proj.fc1.bias".into(), vec![cfg.proj_dim], inv_sqrt(wv)),
            add(&mut params, "proj.fc2.weight".into(), vec![cfg.proj_dim, cfg.out_channels], inv_sqrt(cfg.proj_dim)),
            add(&mut params, "proj.fc2.bias".into(), vec![cfg.out_channels], inv_sqrt(cfg.proj_dim)),
        ];
        Ok(UwnoModel {
            config: cfg,
            filter,
            params,
            lift,
            layers,
            proj,
        })
    }

    pub fn config(&self) -> &UwnoConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Total number of trainable scalars, slopes included.
    pub fn count_parameters(&self) -> usize {
        self.params.scalar_count()
    }

    fn p(&self, slot: usize) -> &Tensor {
        self.params.get(slot)
    }

    fn dense(&self, x: &Tensor, w: usize, b: usize) -> Result<Tensor> {
        Ok(x.matmul(self.p(w))?.add(&self.p(b).reshape(&[1, self.p(b).numel()])?)?)
    }

    fn check_spatial(&self, what: &str, spatial: &[usize]) -> Result<()> {
        if spatial != self.config.resolution.as_slice() {
            return Err(ModelError::Shape(format!(
                "{what} has spatial extents {spatial:?} but the model was built for {:?}",
                self.config.resolution
            )));
        }
        Ok(())
    }

    /// Concatenates input values with coordinates and applies `P`.
    /// Returns channels-first `[B, d_v, spatial..]`.
    pub fn lift(&self, input: &Tensor, grid: &Tensor) -> Result<Tensor> {
        let dims = self.config.spatial_dims;
        let s = input.shape();
        if s.len() != dims + 2 || s[dims + 1] != self.config.in_channels {
            return Err(ModelError::Shape(format!(
                "input has shape {s:?}; expected [B, {:?}.., {}]",
                self.config.resolution, self.config.in_channels
            )));
        }
        let batch = s[0];
        let spatial = s[1..=dims].to_vec();
        self.check_spatial("input", &spatial)?;
        let gs = grid.shape();
        let grid_ok = match gs.len() {
            n if n == dims + 1 => gs[..dims] == spatial[..] && gs[dims] == dims,
            n if n == dims + 2 => gs[0] == batch && gs[1..=dims] == spatial[..] && gs[dims + 1] == dims,
            _ => false,
        };
        if !grid_ok {
            return Err(ModelError::Shape(format!(
                "grid has shape {gs:?}; expected [{spatial:?}.., {dims}] optionally with a leading batch of {batch}"
            )));
        }
        let mut full_grid_shape = vec![batch];
        full_grid_shape.extend(&spatial);
        full_grid_shape.push(dims);
        let grid = if gs.len() == dims + 1 {
            let mut one = vec![1];
            one.extend(gs);
            Tensor::zeros(&full_grid_shape).add(&grid.reshape(&one)?)?
        } else {
            grid.clone()
        };
        let x = Tensor::concat(&[input, &grid], dims + 1)?;
        let points: usize = spatial.iter().product();
        let rows = x.reshape(&[batch * points, self.config.in_channels + dims])?;
        let h = self.config.activation.apply(&self.dense(&rows, self.lift[0], self.lift[1])?);
        let v = self.dense(&h, self.lift[2], self.lift[3])?;
        let mut cl_shape = vec![batch];
        cl_shape.extend(&spatial);
        cl_shape.push(self.config.width);
        let mut order = vec![0, dims + 1];
        order.extend(1..=dims);
        Ok(v.reshape(&cl_shape)?.permute(&order)?)
    }

    /// Applies `Q2(σ(Q1 v))` to channels-first `v`, returning channels-last.
    pub fn project(&self, v: &Tensor) -> Result<Tensor> {
        let dims = self.config.spatial_dims;
        let s = v.shape();
        if s.len() != dims + 2 || s[1] != self.config.width {
            return Err(ModelError::Shape(format!(
                "projection input has shape {s:?}; expected [B, {}, spatial..]",
                self.config.width
            )));
        }
        let mut order = vec![0];
        order.extend(2..dims + 2);
        order.push(1);
        let cl = v.permute(&order)?;
        let points: usize = s[2..].iter().product();
        let rows = cl.reshape(&[s[0] * points, self.config.width])?;
        let r = self.config.activation.apply(&self.dense(&rows, self.proj[0], self.proj[1])?);
        let u = self.dense(&r, self.proj[2], self.proj[3])?;
        let mut out_shape = vec![s[0]];
        out_shape.extend(&s[2..]);
        out_shape.push(self.config.out_channels);
        Ok(u.reshape(&out_shape)?)
    }

    /// Wavelet-space kernel path of layer `j`.
    pub fn kernel_path(&self, j: usize, v: &Tensor) -> Result<Tensor> {
        wavelet_kernel_conv(v, self.p(self.layers[j].r), &self.filter, self.config.level)
    }

    /// Pointwise linear path `W v + b` of layer `j`.
    pub fn pointwise_path(&self, j: usize, v: &Tensor) -> Result<Tensor> {
        let l = &self.layers[j];
        let mut bias_shape = vec![1, self.config.width];
        bias_shape.extend(std::iter::repeat_n(1, self.config.spatial_dims));
        Ok(v.conv_pointwise(self.p(l.w))?.add(&self.p(l.w_bias).reshape(&bias_shape)?)?)
    }

    pub fn unet_weights(&self, j: usize) -> Option<UnetWeights> {
        let s = self.layers[j].unet?;
        let pair = |i: usize| (self.p(s[2 * i]).clone(), self.p(s[2 * i + 1]).clone());
        Some(UnetWeights {
            enc1: pair(0),
            enc2: pair(1),
            bottleneck: pair(2),
            dec1: pair(3),
            dec2: pair(4),
        })
    }

    /// Pre-activation sum `K(·) + W v_j + U(v_j)` of layer `j`.
    pub fn layer_preactivation(&self, j: usize, v_j: &Tensor, v_0: &Tensor) -> Result<Tensor> {
        if v_j.shape() != v_0.shape() {
            return Err(ModelError::Shape(format!(
                "layer input {:?} and lifted input {:?} differ",
                v_j.shape(),
                v_0.shape()
            )));
        }
        let kernel_in = if j == 0 || self.config.baseline_wno {
            v_j.clone()
        } else {
            v_j.add(v_0)?
        };
        let mut s = self.kernel_path(j, &kernel_in)?.add(&self.pointwise_path(j, v_j)?)?;
        if let Some(w) = self.unet_weights(j) {
            s = s.add(&unet_path(v_j, &w, self.config.activation, self.config.unet_padding)?)?;
        }
        Ok(s)
    }

    /// One enhanced wavelet layer on channels-first tensors. All but the
    /// last layer apply `σ(n·a·s)`; the last returns `s` unactivated.
    pub fn layer(&self, j: usize, v_j: &Tensor, v_0: &Tensor) -> Result<Tensor> {
        let s = self.layer_preactivation(j, v_j, v_0)?;
        if j + 1 == self.config.layers {
            return Ok(s);
        }
        let scaled = match self.layers[j].slope {
            Some(a) => s.mul(&self.p(a).scale(self.config.slope_scale as f64))?,
            None => s,
        };
        Ok(self.config.activation.apply(&scaled))
    }

    /// Tensor holding the slope `a` of layer `j`, if the layer has one.
    pub fn slope(&self, j: usize) -> Option<&Tensor> {
        self.layers[j].slope.map(|i| self.p(i))
    }

    pub fn slope_slot(&self, j: usize) -> Option<usize> {
        self.layers[j].slope
    }

    pub fn forward(&self, input: &Tensor, grid: &Tensor) -> Result<Tensor> {
        let v0 = self.lift(input, grid)?;
        let mut v = v0.clone();
        for j in 0..self.config.layers {
            v = self.layer(j, &v, &v0)?;
        }
        self.project(&v)
    }

    /// Copy of the model with every parameter replaced by `tensors`, in
    /// parameter order. The tensors are used as given, so gradients flow
    /// back to whatever produced them.
    pub fn with_tensors(&self, tensors: &[Tensor]) -> Result<UwnoModel> {
        if tensors.len() != self.params.len() {
            return Err(ModelError::Shape(format!(
                "expected {} parameter tensors, found {}",
                self.params.len(),
                tensors.len()
            )));
        }
        let mut model = self.clone();
        for (i, t) in tensors.iter().enumerate() {
            if t.shape() != self.params.get(i).shape() {
                return Err(ModelError::Shape(format!(
                    "parameter {}: shape {:?}, expected {:?}",
                    self.params.name(i),
                    t.shape(),
                    self.params.get(i).shape()
                )));
            }
            model.params.replace(i, t.clone());
        }
        Ok(model)
    }

    /// Rebuilds a model from a configuration and stored parameter values.
    pub fn from_parts(config: &UwnoConfig, named: Vec<(String, Tensor)>) -> Result<UwnoModel> {
        let mut model = UwnoModel::new(config, 0)?;
        if named.len() != model.params.len() {
            return Err(ModelError::Checkpoint(format!(
                "expected {} parameter tensors, found {}",
                model.params.len(),
                named.len()
            )));
        }
        for (i, (name, t)) in named.into_iter().enumerate() {
            let want = model.params.name(i);
            if name != want || t.shape() != model.params.get(i).shape() {
                return Err(ModelError::Checkpoint(format!(
                    "parameter {i}: found {name} {:?}, expected {want} {:?}",
                    t.shape(),
                    model.params.get(i).shape()
                )));
            }
            model.params.replace(i, Tensor::param(t.to_vec(), t.shape())?);
        }
        Ok(model)
    }
}

impl Operator for UwnoModel {
    fn predict(&self, input: &Tensor, grid: &Tensor) -> Result<Tensor> {
        self.forward(input, grid)
    }
}

/// Returns the input unchanged; used to test the evaluation plumbing.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityOperator;

impl Operator for IdentityOperator {
    fn predict(&self, input: &Tensor, _grid: &Tensor) -> Result<Tensor> {
        Ok(input.clone())
    }
}
