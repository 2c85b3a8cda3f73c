use std::path::Path;

use super::{IdentityOperator, ModelError, Operator, Result, UwnoConfig, UwnoModel};
use crate::data::container::{container_read, container_write, find, Record};
use crate::tensor::Tensor;

const PARAM_PREFIX: &str = "param/";

/// A model restored from disk.
#[derive(Clone, Debug)]
pub enum SavedModel {
    Uwno(UwnoModel),
    /// Copies input to output; used to test evaluation plumbing.
    Identity,
}

impl SavedModel {
    pub fn operator(&self) -> &dyn Operator {
        match self {
            SavedModel::Uwno(m) => m,
            SavedModel::Identity => &IdentityOperator,
        }
    }
}

/// A checkpoint: the model plus any extra records stored beside it.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub model: SavedModel,
    pub extra: Vec<Record>,
}

impl Checkpoint {
    pub fn extra(&self, name: &str) -> Option<&Record> {
        self.extra.iter().find(|r| r.name == name)
    }
}

/// Writes `model_kind`, `model_config` (JSON text), one `param/<name>`
/// record per parameter tensor and the caller's `extra` records.
pub fn save_checkpoint(path: impl AsRef<Path>, model: &SavedModel, extra: &[Record]) -> Result<()> {
    let mut records = Vec::new();
    match model {
        SavedModel::Uwno(m) => {
            records.push(Record::text("model_kind", "uwno"));
            let json = serde_json::to_string(m.config()).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
            records.push(Record::text("model_config", &json));
            for (name, t) in m.params().iter() {
                records.push(Record::f64(format!("{PARAM_PREFIX}{name}"), t.shape(), t.to_vec()));
            }
        }
        SavedModel::Identity => records.push(Record::text("model_kind", "identity")),
    }
    records.extend(extra.iter().cloned());
    container_write(path, &records)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let records = container_read(path)?;
    let kind = find(&records, "model_kind")?.as_text()?;
    let is_own = |r: &Record| r.name == "model_kind" || r.name == "model_config" || r.name.starts_with(PARAM_PREFIX);
    let model = match kind.as_str() {
        "uwno" => {
            let json = find(&records, "model_config")?.as_text()?;
            let config: UwnoConfig =
                serde_json::from_str(&json).map_err(|e| ModelError::Checkpoint(format!("model_config: {e}")))?;
            let named = records
                .iter()
                .filter(|r| r.name.starts_with(PARAM_PREFIX))
                .map(|r| {
                    let t = Tensor::new(r.as_f64()?.to_vec(), &r.shape)?;
                    Ok((r.name[PARAM_PREFIX.len()..].to_string(), t))
                })
                .collect::<Result<Vec<_>>>()?;
            SavedModel::Uwno(UwnoModel::from_parts(&config, named)?)
        }
        "identity" => SavedModel::Identity,
        other => return Err(ModelError::Checkpoint(format!("unknown model kind {other:?}"))),
    };
    let extra = records.into_iter().filter(|r| !is_own(r)).collect();
    Ok(Checkpoint { model, extra })
}
