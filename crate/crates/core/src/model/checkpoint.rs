//! JSON checkpoints: config, vocabulary size and named tensors.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{Layout, ParameterSet};
use super::Model;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: ModelConfig,
    pub num_items: usize,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn from_model(model: &Model<f32>) -> Self {
        let params = model.params();
        let tensors = params
            .layout()
            .groups
            .iter()
            .map(|g| TensorRecord {
                name: g.name.clone(),
                shape: g.shape.clone(),
                values: params.get(&g.range).to_vec(),
            })
            .collect();
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            config: model.config().clone(),
            num_items: model.num_items(),
            tensors,
        }
    }

    /// Rebuilds the model, checking every tensor name and shape.
    pub fn into_model(self) -> Result<Model<f32>> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Shape(format!(
                "checkpoint format {} is not supported (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.config.validate()?;
        let layout = Arc::new(Layout::new(&self.config, self.num_items));
        if layout.groups.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} tensors, config implies {}",
                self.tensors.len(),
                layout.groups.len()
            )));
        }
        let mut params = ParameterSet::zeros(layout.clone());
        for (g, t) in layout.groups.iter().zip(self.tensors) {
            if g.name != t.name || g.shape != t.shape || t.values.len() != g.range.len() {
                return Err(Error::Shape(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, g.name, g.shape
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Shape(format!(
                    "tensor {} has non-finite values",
                    t.name
                )));
            }
            params.get_mut(&g.range).copy_from_slice(&t.values);
        }
        Model::from_parameters(self.config, params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

impl Model<f32> {
    pub fn save(&self, path: &Path) -> Result<()> {
        Checkpoint::from_model(self).save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Checkpoint::load(path)?.into_model()
    }
}
