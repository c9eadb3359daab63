//! Spectral decompositions along the temporal axis of a sequence.
//!
//! Everything here works on a single real channel. The model broadcasts these
//! operations across hidden dimensions by precomputing the linear low-pass
//! operator with [`lowpass_operator`].

mod category;
mod dft;
mod filter;
mod haar;
mod padding;

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use category::{dense_category_encoding, scaled_dc_component, DenseCategoryVector};
pub use dft::{forward_dft, inverse_dft, HalfSpectrum};
pub use filter::{
    band_split, high_freq_component, low_freq_component, lowpass_operator, max_cutoff, rescale,
};
pub use haar::{default_wavelet_levels, haar_analysis, haar_synthesis, WaveletDecomposition};
pub use padding::{pad_history, PaddedHistory, PaddingMode, PAD_ID};

/// A finite real-valued signal of length at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct RealSequence(Vec<f64>);

impl RealSequence {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("sequence must not be empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(RealSequence(values))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for RealSequence {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealSequence {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl TryFrom<&[f64]> for RealSequence {
    type Error = Error;

    fn try_from(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }
}

/// Which decomposition the frequency rescaler uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpectralBackend {
    #[default]
    Fourier,
    /// Multi-level Haar transform.
    Wavelet,
    /// Identity split: the low band is the whole signal, so the rescaler
    /// degenerates to a pass-through.
    Residual,
}

impl SpectralBackend {
    pub const ALL: [SpectralBackend; 3] = [
        SpectralBackend::Fourier,
        SpectralBackend::Wavelet,
        SpectralBackend::Residual,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpectralBackend::Fourier => "fourier",
            SpectralBackend::Wavelet => "wavelet",
            SpectralBackend::Residual => "residual",
        }
    }
}

impl fmt::Display for SpectralBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpectralBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" | "dft" | "fft" => Ok(SpectralBackend::Fourier),
            "wavelet" | "dwt" | "haar" => Ok(SpectralBackend::Wavelet),
            "residual" => Ok(SpectralBackend::Residual),
            other => Err(Error::Parameter(format!(
                "unknown spectral backend '{other}'"
            ))),
        }
    }
}
