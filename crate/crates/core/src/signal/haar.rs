use std::f64::consts::FRAC_1_SQRT_2;

use super::RealSequence;
use crate::error::{Error, Result};

/// Cap on the analysis depth used by the rescaler.
pub const MAX_DEFAULT_LEVELS: usize = 3;

/// Multi-level orthonormal Haar decomposition.
///
/// Odd-length levels are extended by repeating their last sample before
/// filtering, so a level of length `n` yields `ceil(n/2)` approximation and
/// `ceil(n/2)` detail coefficients. Synthesis drops the extension again.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    approximation: Vec<f64>,
    /// Coarse to fine.
    details: Vec<Vec<f64>>,
    original_length: usize,
}

/// Lengths of the signal entering each analysis level, finest first.
fn level_lengths(d: usize, levels: usize) -> Vec<usize> {
    let mut lens = Vec::with_capacity(levels + 1);
    let mut n = d;
    lens.push(n);
    for _ in 0..levels {
        n = n.div_ceil(2);
        lens.push(n);
    }
    lens
}

fn max_levels(d: usize) -> usize {
    if d < 2 {
        0
    } else {
        d.ilog2() as usize
    }
}

/// `floor(log2(len))` capped at [`MAX_DEFAULT_LEVELS`].
pub fn default_wavelet_levels(len: usize) -> usize {
    max_levels(len).min(MAX_DEFAULT_LEVELS)
}

impl WaveletDecomposition {
    pub fn new(
        approximation: Vec<f64>,
        details: Vec<Vec<f64>>,
        original_length: usize,
    ) -> Result<Self> {
        let levels = details.len();
        if levels == 0 {
            return Err(Error::InvalidInput(
                "decomposition needs at least one level".into(),
            ));
        }
        if levels > max_levels(original_length) {
            return Err(Error::InvalidInput(format!(
                "{levels} levels is too deep for length {original_length}"
            )));
        }
        let lens = level_lengths(original_length, levels);
        if approximation.len() != lens[levels] {
            return Err(Error::InvalidInput(format!(
                "approximation has {} coefficients, expected {}",
                approximation.len(),
                lens[levels]
            )));
        }
        // details[0] is the coarsest level
        for (i, det) in details.iter().enumerate() {
            let expected = lens[levels - i];
            if det.len() != expected {
                return Err(Error::InvalidInput(format!(
                    "detail level {i} has {} coefficients, expected {expected}",
                    det.len()
                )));
            }
        }
        let all_finite = approximation
            .iter()
            .chain(details.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidInput("non-finite wavelet coefficient".into()));
        }
        Ok(WaveletDecomposition {
            approximation,
            details,
            original_length,
        })
    }

    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn approximation(&self) -> &[f64] {
        &self.approximation
    }

    pub fn details(&self) -> &[Vec<f64>] {
        &self.details
    }

    pub fn original_length(&self) -> usize {
        self.original_length
    }

    pub fn coefficient_count(&self) -> usize {
        self.approximation.len() + self.details.iter().map(Vec::len).sum::<usize>()
    }

    /// Coefficients coarse to fine: approximation, then each detail level.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.approximation.clone();
        for d in &self.details {
            out.extend_from_slice(d);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) for a decomposition of the same shape.
    pub fn with_flat_coefficients(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.coefficient_count() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                self.coefficient_count(),
                flat.len()
            )));
        }
        let (approx, mut rest) = flat.split_at(self.approximation.len());
        let mut details = Vec::with_capacity(self.details.len());
        for d in &self.details {
            let (head, tail) = rest.split_at(d.len());
            details.push(head.to_vec());
            rest = tail;
        }
        WaveletDecomposition::new(approx.to_vec(), details, self.original_length)
    }
}

pub fn haar_analysis(x: &RealSequence, levels: usize) -> Result<WaveletDecomposition> {
    let d = x.len();
    if levels == 0 || levels > max_levels(d) {
        return Err(Error::Parameter(format!(
            "Haar depth {levels} invalid for length {d} (allowed 1..={})",
            max_levels(d)
        )));
    }
    let mut current = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        if current.len() % 2 == 1 {
            let last = current[current.len() - 1];
            current.push(last);
        }
        let (approx, detail): (Vec<f64>, Vec<f64>) = current
            .chunks_exact(2)
            .map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2))
            .unzip();
        details.push(detail);
        current = approx;
    }
    details.reverse();
    Ok(WaveletDecomposition {
        approximation: current,
        details,
        original_length: d,
    })
}

pub fn haar_synthesis(w: &WaveletDecomposition) -> RealSequence {
    let levels = w.levels();
    let lens = level_lengths(w.original_length, levels);
    let mut current = w.approximation.clone();
    for (i, detail) in w.details.iter().enumerate() {
        let target = lens[levels - 1 - i];
        let mut next = Vec::with_capacity(2 * current.len());
        for (a, d) in current.iter().zip(detail) {
            next.push((a + d) * FRAC_1_SQRT_2);
            next.push((a - d) * FRAC_1_SQRT_2);
        }
        next.truncate(target);
        current = next;
    }
    RealSequence(current)
}
