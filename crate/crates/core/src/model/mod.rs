//! The encoder: item and position embeddings followed by layers that mix
//! causal self-attention with a learnable frequency rescaler.
//!
//! Activations are row-major `max_len x hidden` buffers. Forward and backward
//! passes are written by hand and are generic over [`Real`] so the same code
//! trains in `f32` and is gradient-checked in `f64`.

mod checkpoint;
mod config;
mod encoder;
mod params;
mod scoring;
pub mod tensor;

use std::sync::Arc;

pub use checkpoint::{Checkpoint, TensorRecord, CHECKPOINT_FORMAT_VERSION};
pub use config::ModelConfig;
pub use encoder::{attention_mask, Branches, ForwardCache};
pub use params::{EmbedOffsets, Group, LayerOffsets, Layout, ParameterSet};
pub use scoring::sequence_loss;
pub use tensor::Real;

use crate::error::{Error, Result};
use crate::signal::lowpass_operator;

#[derive(Debug, Clone)]
pub struct Model<T> {
    config: ModelConfig,
    params: ParameterSet<T>,
    // max_len x max_len low-pass operator and its transpose
    lowpass: Vec<T>,
    lowpass_t: Vec<T>,
}

impl<T: Real> Model<T> {
    /// Freshly initialized model over `num_items` real items (ids `1..=num_items`).
    pub fn new(config: ModelConfig, num_items: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if num_items == 0 {
            return Err(Error::Parameter("model needs at least one item".into()));
        }
        let layout = Arc::new(Layout::new(&config, num_items));
        let params = ParameterSet::init(layout, config.init_std, seed);
        Self::from_parameters(config, params)
    }

    pub fn from_parameters(config: ModelConfig, params: ParameterSet<T>) -> Result<Self> {
        config.validate()?;
        let expected = Layout::new(&config, params.layout().num_items);
        if **params.layout() != expected {
            return Err(Error::Shape(
                "parameter layout does not match the model config".into(),
            ));
        }
        let (lowpass, lowpass_t) = if config.include_rescaler {
            let len = config.max_len;
            let op = lowpass_operator(len, config.cutoff, config.backend)?;
            let op: Vec<T> = op.into_iter().map(T::of).collect();
            let op_t = tensor::transpose(&op, len, len);
            (op, op_t)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Model {
            config,
            params,
            lowpass,
            lowpass_t,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    /// Direct parameter access. Call [`ParameterSet::project`] after editing.
    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn num_items(&self) -> usize {
        self.params.layout().num_items
    }

    /// Same weights in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            params: self.params.cast(),
            lowpass: self.lowpass.iter().map(|v| U::of(v.as_f64())).collect(),
            lowpass_t: self.lowpass_t.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}
