use std::f64::consts::TAU;

use num_complex::Complex64;

use super::RealSequence;
use crate::error::{Error, Result};

const HERMITIAN_TOL: f64 = 1e-9;

/// Non-redundant half of the unitary DFT of a real signal of length `d`:
/// bins `0..=d/2`. The remaining bins are complex conjugates of these.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpectrum {
    bins: Vec<Complex64>,
    original_length: usize,
}

impl HalfSpectrum {
    /// Validates bin count and the real-valued DC/Nyquist constraint.
    pub fn new(bins: Vec<Complex64>, original_length: usize) -> Result<Self> {
        if original_length == 0 {
            return Err(Error::InvalidInput("spectrum of an empty signal".into()));
        }
        let expected = original_length / 2 + 1;
        if bins.len() != expected {
            return Err(Error::InvalidInput(format!(
                "half spectrum of length-{original_length} signal needs {expected} bins, got {}",
                bins.len()
            )));
        }
        if bins.iter().any(|b| !b.re.is_finite() || !b.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite spectral bin".into()));
        }
        if bins[0].im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidInput(format!(
                "DC bin must be real, imaginary part is {}",
                bins[0].im
            )));
        }
        if original_length.is_multiple_of(2) && bins[expected - 1].im.abs() > HERMITIAN_TOL {
            return Err(Error::InvalidInput(format!(
                "Nyquist bin must be real, imaginary part is {}",
                bins[expected - 1].im
            )));
        }
        Ok(HalfSpectrum {
            bins,
            original_length,
        })
    }

    pub fn bins(&self) -> &[Complex64] {
        &self.bins
    }

    pub fn bins_mut(&mut self) -> &mut [Complex64] {
        &mut self.bins
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    /// How many full-spectrum bins each half-spectrum bin stands for (1 or 2).
    pub fn multiplicity(&self, k: usize) -> usize {
        let d = self.original_length;
        if k == 0 || (d.is_multiple_of(2) && k == d / 2) {
            1
        } else {
            2
        }
    }

    /// Sum of squared magnitudes over the full (mirrored) spectrum.
    pub fn energy(&self) -> f64 {
        self.bins
            .iter()
            .enumerate()
            .map(|(k, b)| self.multiplicity(k) as f64 * b.norm_sqr())
            .sum()
    }
}

fn twiddle(k: usize, n: usize, d: usize) -> f64 {
    // reduce k*n mod d first so the angle stays small
    TAU * ((k * n) % d) as f64 / d as f64
}

/// Unitary DFT, bin `k = d^{-1/2} Σ_n x_n e^{-2πikn/d}` for `k = 0..=d/2`.
pub fn forward_dft(x: &RealSequence) -> HalfSpectrum {
    let d = x.len();
    let norm = 1.0 / (d as f64).sqrt();
    let mut bins: Vec<Complex64> = (0..=d / 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &v) in x.iter().enumerate() {
                let a = twiddle(k, n, d);
                acc += Complex64::new(v * a.cos(), -v * a.sin());
            }
            acc * norm
        })
        .collect();
    bins[0].im = 0.0;
    if d.is_multiple_of(2) {
        bins[d / 2].im = 0.0;
    }
    HalfSpectrum {
        bins,
        original_length: d,
    }
}

/// Inverse of [`forward_dft`], rebuilding the real signal from its Hermitian half.
pub fn inverse_dft(s: &HalfSpectrum) -> RealSequence {
    let d = s.original_length;
    let norm = 1.0 / (d as f64).sqrt();
    let values = (0..d)
        .map(|n| {
            let mut acc = 0.0;
            for (k, b) in s.bins.iter().enumerate() {
                let a = twiddle(k, n, d);
                let term = b.re * a.cos() - b.im * a.sin();
                acc += s.multiplicity(k) as f64 * term;
            }
            acc * norm
        })
        .collect();
    RealSequence(values)
}
