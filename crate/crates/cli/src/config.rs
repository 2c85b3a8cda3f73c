use std::path::{Path, PathBuf};

use serde::Deserialize;
use uwno_core::data::{gen_advection, gen_advection_space_time, gen_burgers, gen_poisson, DatasetBundle};
use uwno_core::model::UwnoConfig;
use uwno_core::train::TrainConfig;

use crate::error::{CliError, CliResult};

/// A training run as read from JSON. Unknown keys are rejected at every level.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Problem tag; must match the dataset's.
    pub problem: String,
    /// Seed for initialization and shuffling. `--seed` wins, then this,
    /// then `UWNO_SEED`, then `train.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Mirrors the model config. `resolution`, `spatial_dims` and the
    /// channel counts default to the dataset's.
    #[serde(default)]
    pub model: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub train: TrainConfig,
    pub data: DataSection,
    /// Directory for metrics, checkpoint and summary.
    pub output_dir: PathBuf,
}

/// Either a dataset file or generator parameters.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Container file; relative paths resolve against the config's directory.
    pub path: Option<PathBuf>,
    pub n: Option<usize>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    /// Advection final time (default 0.5).
    pub t_final: Option<f64>,
    /// Burgers viscosity (default 0.1).
    pub nu: Option<f64>,
    /// Space-time advection grid (defaults 40 and 0.025).
    pub nt: Option<usize>,
    pub dt: Option<f64>,
}

pub const DEFAULT_T_FINAL: f64 = 0.5;
pub const DEFAULT_NU: f64 = 0.1;
pub const DEFAULT_NT: usize = 40;
pub const DEFAULT_DT: f64 = 0.025;

/// Generator parameters shared by `gen-data` and inline data sections.
pub struct GenSpec {
    pub problem: String,
    pub n: usize,
    pub resolution: usize,
    pub seed: u64,
    pub t_final: f64,
    pub nu: f64,
    pub nt: usize,
    pub dt: f64,
}

impl GenSpec {
    pub fn generate(&self) -> CliResult<DatasetBundle> {
        let bundle = match self.problem.as_str() {
            "poisson" => gen_poisson(self.n, self.resolution, self.seed)?,
            "advection" => gen_advection(self.n, self.resolution, self.t_final, self.seed)?,
            "advection-space-time" => gen_advection_space_time(self.n, self.resolution, self.nt, self.dt, self.seed)?,
            "burgers" => gen_burgers(self.n, self.resolution, self.nu, self.seed)?,
            other => {
                return Err(CliError::usage(format!(
                    "unknown problem {other:?} (expected poisson, advection, advection-space-time or burgers)"
                )))
            }
        };
        Ok(bundle)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        RunConfig::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<RunConfig> {
        serde_json::from_str(text).map_err(|e| CliError::usage(format!("invalid run config: {e}")))
    }

    /// Loads or generates the dataset.
    pub fn dataset(&self, config_dir: &Path) -> CliResult<DatasetBundle> {
        let d = &self.data;
        let bundle = match &d.path {
            Some(p) => {
                let p = config_dir.join(p);
                if !p.exists() {
                    return Err(CliError::io(&p, "dataset file not found"));
                }
                DatasetBundle::load(&p)?
            }
            None => {
                let (Some(n), Some(resolution)) = (d.n, d.resolution) else {
                    return Err(CliError::usage("data section needs either path or n and resolution"));
                };
                GenSpec {
                    problem: self.problem.clone(),
                    n,
                    resolution,
                    seed: d.seed.unwrap_or(0),
                    t_final: d.t_final.unwrap_or(DEFAULT_T_FINAL),
                    nu: d.nu.unwrap_or(DEFAULT_NU),
                    nt: d.nt.unwrap_or(DEFAULT_NT),
                    dt: d.dt.unwrap_or(DEFAULT_DT),
                }
                .generate()?
            }
        };
        if bundle.problem != self.problem {
            return Err(CliError::usage(format!(
                "config problem {:?} does not match dataset problem {:?}",
                self.problem, bundle.problem
            )));
        }
        Ok(bundle)
    }

    /// The model config with grid and channel fields filled from `data`.
    pub fn model_config(&self, data: &DatasetBundle) -> CliResult<UwnoConfig> {
        let mut m = self.model.clone();
        let res = data.resolution();
        let fill = |m: &mut serde_json::Map<String, serde_json::Value>, k: &str, v: serde_json::Value| {
            m.entry(k.to_string()).or_insert(v);
        };
        fill(&mut m, "resolution", serde_json::json!(res));
        fill(&mut m, "spatial_dims", serde_json::json!(res.len()));
        let channels = |t: &uwno_core::tensor::Tensor| *t.shape().last().expect("rank >= 3");
        fill(&mut m, "in_channels", serde_json::json!(channels(&data.inputs)));
        fill(&mut m, "out_channels", serde_json::json!(channels(&data.outputs)));
        let cfg: UwnoConfig = serde_json::from_value(serde_json::Value::Object(m))
            .map_err(|e| CliError::usage(format!("invalid model section: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Explicit seed, else `UWNO_SEED`, else `fallback`.
pub fn resolve_seed(explicit: Option<u64>, fallback: u64) -> CliResult<u64> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var("UWNO_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::usage(format!("UWNO_SEED must be an unsigned integer, got {v:?}"))),
        Err(_) => Ok(fallback),
    }
}
