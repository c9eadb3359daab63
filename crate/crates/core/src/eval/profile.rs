use serde::{Deserialize, Serialize};

use crate::data::SplitExample;
use crate::error::{Error, Result};
use crate::model::{Model, Real};
use crate::signal::{band_split, RealSequence};

/// Per-position norms of the low- and high-frequency parts of the embedded
/// window, taken across channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormProfileRow {
    pub position: usize,
    pub is_pad: bool,
    pub lfc_norm: f64,
    pub hfc_norm: f64,
}

/// Decomposes each channel of the embedding-layer output along the
/// temporal axis with the model's cutoff and backend.
pub fn lfc_hfc_norm_profile<T: Real>(
    model: &Model<T>,
    example: &SplitExample,
) -> Result<Vec<NormProfileRow>> {
    let cfg = model.config();
    let x = model.embed(&example.input_window)?;
    let (len, h) = (cfg.max_len, cfg.hidden_size);
    let mut lfc_sq = vec![0.0; len];
    let mut hfc_sq = vec![0.0; len];
    for j in 0..h {
        let channel = RealSequence::new((0..len).map(|t| x[t * h + j].as_f64()).collect())?;
        let (low, high) = band_split(&channel, cfg.cutoff, cfg.backend)?;
        for t in 0..len {
            lfc_sq[t] += low[t] * low[t];
            hfc_sq[t] += high[t] * high[t];
        }
    }
    Ok((0..len)
        .map(|t| NormProfileRow {
            position: t,
            is_pad: !example.position_mask[t],
            lfc_norm: lfc_sq[t].sqrt(),
            hfc_norm: hfc_sq[t].sqrt(),
        })
        .collect())
}

/// Mean LFC and HFC norms over the padding positions of one or more profiles.
pub fn pad_region_means(rows: &[NormProfileRow]) -> Result<(f64, f64)> {
    let pads: Vec<&NormProfileRow> = rows.iter().filter(|r| r.is_pad).collect();
    if pads.is_empty() {
        return Err(Error::InvalidInput(
            "profile has no padding positions".into(),
        ));
    }
    let n = pads.len() as f64;
    Ok((
        pads.iter().map(|r| r.lfc_norm).sum::<f64>() / n,
        pads.iter().map(|r| r.hfc_norm).sum::<f64>() / n,
    ))
}
