//! The JSON experiment document shared by every CLI command, with dotted-key
//! overrides and sweep axes.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One user per line: `user_id item item ...`.
    pub dataset: PathBuf,
    /// Optional `item category` lines.
    pub category_map: Option<PathBuf>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub sweep: Option<SweepAxis>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: PathBuf::new(),
            category_map: None,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("runs"),
            sweep: None,
        }
    }
}

/// One configuration key and the values it takes across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub axis: String,
    pub values: Vec<Value>,
}

/// Short names accepted for common keys.
const ALIASES: &[(&str, &str)] = &[
    ("max_len", "model.max_len"),
    ("alpha", "model.alpha"),
    ("c", "model.cutoff"),
    ("cutoff", "model.cutoff"),
    ("padding", "model.padding"),
    ("backend", "model.backend"),
    ("num_heads", "model.num_heads"),
    ("hidden_size", "model.hidden_size"),
    ("learning_rate", "train.learning_rate"),
    ("lr", "train.learning_rate"),
    ("objective", "train.objective"),
];

/// Resolves an alias to its dotted path.
pub fn canonical_key(key: &str) -> &str {
    ALIASES
        .iter()
        .find(|(a, _)| *a == key)
        .map_or(key, |(_, full)| full)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Parameter("seed list is empty".into()));
        }
        let mut seen = self.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return Err(Error::Parameter("seed list has duplicates".into()));
        }
        if self.dataset.as_os_str().is_empty() {
            return Err(Error::Parameter("no dataset path configured".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::Parameter(format!(
                    "sweep over '{}' has no values",
                    s.axis
                )));
            }
            for v in &s.values {
                self.with_override(&s.axis, v.clone())?;
            }
        }
        Ok(())
    }

    /// Copy with one dotted key (or alias) replaced. The result must still
    /// deserialize, so unknown keys and ill-typed values are rejected.
    pub fn with_override(&self, key: &str, value: Value) -> Result<Self> {
        let path = canonical_key(key);
        let mut doc = serde_json::to_value(self)?;
        let mut slot = &mut doc;
        for part in path.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::Parameter(format!("unknown configuration key '{key}'")))?;
        }
        *slot = value;
        serde_json::from_value(doc)
            .map_err(|e| Error::Parameter(format!("bad value for '{key}': {e}")))
    }

    /// Like [`Self::with_override`] but parses a command-line string: JSON
    /// if it parses as JSON, otherwise a plain string.
    pub fn with_override_str(&self, key: &str, raw: &str) -> Result<Self> {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.with_override(key, value)
    }
}

/// Filesystem-friendly label of a sweep value.
pub fn value_label(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
