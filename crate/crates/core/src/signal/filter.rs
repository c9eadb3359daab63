//! Low/high band split and the frequency rescaler for one channel.

use num_complex::Complex64;

use super::dft::{forward_dft, inverse_dft};
use super::haar::{default_wavelet_levels, haar_analysis, haar_synthesis};
use super::{RealSequence, SpectralBackend};
use crate::error::{Error, Result};

/// Largest admissible cutoff for a length-`len` signal. `None` means unbounded.
pub fn max_cutoff(len: usize, backend: SpectralBackend) -> Option<usize> {
    match backend {
        SpectralBackend::Fourier => Some(len / 2 + 1),
        SpectralBackend::Wavelet => {
            let levels = default_wavelet_levels(len);
            if levels == 0 {
                Some(0)
            } else {
                Some(wavelet_coefficient_count(len, levels))
            }
        }
        SpectralBackend::Residual => None,
    }
}

fn wavelet_coefficient_count(len: usize, levels: usize) -> usize {
    let mut n = len;
    let mut total = 0;
    for _ in 0..levels {
        n = n.div_ceil(2);
        total += n;
    }
    total + n
}

fn check_cutoff(len: usize, c: usize, backend: SpectralBackend) -> Result<()> {
    if backend == SpectralBackend::Residual {
        return Ok(());
    }
    let hi = max_cutoff(len, backend).unwrap_or(usize::MAX);
    if c == 0 || c > hi {
        return Err(Error::Parameter(format!(
            "cutoff {c} outside 1..={hi} for {backend} backend at length {len}"
        )));
    }
    Ok(())
}

/// Keeps the `c` coarsest Haar coefficients (approximation first, then detail
/// levels coarse to fine) at an explicit depth.
pub fn wavelet_low_freq_component(
    x: &RealSequence,
    c: usize,
    levels: usize,
) -> Result<RealSequence> {
    let w = haar_analysis(x, levels)?;
    let total = w.coefficient_count();
    if c == 0 || c > total {
        return Err(Error::Parameter(format!("cutoff {c} outside 1..={total}")));
    }
    let mut flat = w.flatten();
    flat[c..].iter_mut().for_each(|v| *v = 0.0);
    Ok(haar_synthesis(&w.with_flat_coefficients(&flat)?))
}

pub fn low_freq_component(
    x: &RealSequence,
    c: usize,
    backend: SpectralBackend,
) -> Result<RealSequence> {
    check_cutoff(x.len(), c, backend)?;
    match backend {
        SpectralBackend::Fourier => {
            let mut s = forward_dft(x);
            s.bins_mut()[c..]
                .iter_mut()
                .for_each(|b| *b = Complex64::new(0.0, 0.0));
            Ok(inverse_dft(&s))
        }
        SpectralBackend::Wavelet => {
            wavelet_low_freq_component(x, c, default_wavelet_levels(x.len()))
        }
        SpectralBackend::Residual => Ok(x.clone()),
    }
}

/// `x - LFC_c(x)`.
pub fn high_freq_component(
    x: &RealSequence,
    c: usize,
    backend: SpectralBackend,
) -> Result<RealSequence> {
    Ok(band_split(x, c, backend)?.1)
}

/// Returns `(LFC, HFC)` with `HFC = x - LFC`.
pub fn band_split(
    x: &RealSequence,
    c: usize,
    backend: SpectralBackend,
) -> Result<(RealSequence, RealSequence)> {
    let low = low_freq_component(x, c, backend)?;
    let high = x.iter().zip(low.iter()).map(|(a, b)| a - b).collect();
    Ok((low, RealSequence(high)))
}

/// `LFC_c(x) + beta * HFC_c(x)`.
pub fn rescale(
    x: &RealSequence,
    c: usize,
    beta: f64,
    backend: SpectralBackend,
) -> Result<RealSequence> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Parameter(format!(
            "rescale weight must be finite and >= 0, got {beta}"
        )));
    }
    let (low, high) = band_split(x, c, backend)?;
    Ok(RealSequence(
        low.iter()
            .zip(high.iter())
            .map(|(l, h)| l + beta * h)
            .collect(),
    ))
}

/// Row-major `len x len` matrix `M` with `LFC_c(x) = M x` for every `x`.
///
/// Column `j` is the low band of the `j`-th unit vector.
pub fn lowpass_operator(len: usize, c: usize, backend: SpectralBackend) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::Parameter("operator length must be positive".into()));
    }
    check_cutoff(len, c, backend)?;
    let mut m = vec![0.0; len * len];
    let mut e = vec![0.0; len];
    for j in 0..len {
        e[j] = 1.0;
        let col = low_freq_component(&RealSequence(e.clone()), c, backend)?;
        for (i, v) in col.iter().enumerate() {
            m[i * len + j] = *v;
        }
        e[j] = 0.0;
    }
    Ok(m)
}
