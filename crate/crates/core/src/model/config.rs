use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{max_cutoff, PaddingMode, SpectralBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub num_layers: usize,
    pub num_heads: usize,
    /// Weight of the rescaler branch; `1 - alpha` goes to attention.
    pub alpha: f64,
    /// Number of low-frequency components kept (half-spectrum bins for
    /// Fourier, coarsest coefficients for wavelet).
    pub cutoff: usize,
    pub backend: SpectralBackend,
    pub padding: PaddingMode,
    pub max_len: usize,
    pub dropout: f64,
    pub ffn_multiplier: usize,
    /// When false the rescaler branch is never evaluated (attention-only build).
    pub include_rescaler: bool,
    /// Standard deviation of the normal initializer.
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden_size: 64,
            num_layers: 2,
            num_heads: 1,
            alpha: 0.7,
            cutoff: 3,
            backend: SpectralBackend::Fourier,
            padding: PaddingMode::Zero,
            max_len: 50,
            dropout: 0.5,
            ffn_multiplier: 4,
            include_rescaler: true,
            init_std: 0.02,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.hidden_size == 0
            || self.num_heads == 0
            || self.max_len == 0
            || self.ffn_multiplier == 0
        {
            return bad(
                "hidden_size, num_heads, max_len and ffn_multiplier must be positive".into(),
            );
        }
        if !self.hidden_size.is_multiple_of(self.num_heads) {
            return bad(format!(
                "hidden_size {} is not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std {} must be positive", self.init_std));
        }
        if self.include_rescaler {
            if let Some(hi) = max_cutoff(self.max_len, self.backend) {
                if self.cutoff == 0 || self.cutoff > hi {
                    return bad(format!(
                        "cutoff {} outside 1..={hi} for {} backend at max_len {}",
                        self.cutoff, self.backend, self.max_len
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    pub fn ffn_inner(&self) -> usize {
        self.hidden_size * self.ffn_multiplier
    }
}
