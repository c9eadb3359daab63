use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved item id for zero padding.
pub const PAD_ID: u32 = 0;

/// How a history shorter than the window is filled on the left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PaddingMode {
    /// Reserved pad token.
    #[default]
    Zero,
    /// Periodic continuation: the slot just left of the history holds its last item.
    Cyclic,
    /// Mirror about the first item without repeating it.
    Reflect,
    /// Mirror about the first item, repeating it.
    Symmetric,
}

impl PaddingMode {
    pub const ALL: [PaddingMode; 4] = [
        PaddingMode::Zero,
        PaddingMode::Cyclic,
        PaddingMode::Reflect,
        PaddingMode::Symmetric,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PaddingMode::Zero => "zero",
            PaddingMode::Cyclic => "cyclic",
            PaddingMode::Reflect => "reflect",
            PaddingMode::Symmetric => "symmetric",
        }
    }
}

impl fmt::Display for PaddingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PaddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zero" => Ok(PaddingMode::Zero),
            "cyclic" | "circular" | "wrap" => Ok(PaddingMode::Cyclic),
            "reflect" => Ok(PaddingMode::Reflect),
            "symmetric" => Ok(PaddingMode::Symmetric),
            other => Err(Error::Parameter(format!("unknown padding mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaddedHistory {
    pub items: Vec<u32>,
    /// Number of padded slots at the front.
    pub pad_len: usize,
    /// Set when a mirror/cyclic mode had to fall back to zero padding.
    pub warning: Option<String>,
}

/// Index into `0..n` for the slot `i >= 1` steps left of the history start.
fn source_index(mode: PaddingMode, n: usize, i: usize) -> usize {
    match mode {
        PaddingMode::Zero => unreachable!("zero padding has no source"),
        PaddingMode::Cyclic => (n - i % n) % n,
        PaddingMode::Reflect => {
            if n == 1 {
                return 0;
            }
            let period = 2 * (n - 1);
            let j = i % period;
            if j < n {
                j
            } else {
                period - j
            }
        }
        PaddingMode::Symmetric => {
            let j = (i - 1) % (2 * n);
            if j < n {
                j
            } else {
                2 * n - 1 - j
            }
        }
    }
}

/// Left-pads `seq` to exactly `target_len` items.
///
/// The caller truncates histories longer than the window first; passing one
/// here is an error.
pub fn pad_history(seq: &[u32], target_len: usize, mode: PaddingMode) -> Result<PaddedHistory> {
    let n = seq.len();
    if n > target_len {
        return Err(Error::Parameter(format!(
            "history of length {n} exceeds window {target_len}; truncate first"
        )));
    }
    let pad_len = target_len - n;
    let mut warning = None;
    let mode = if n == 0 && mode != PaddingMode::Zero {
        warning = Some(format!(
            "empty history cannot use {mode} padding; zero-padded instead"
        ));
        log::warn!("empty history: falling back from {mode} to zero padding");
        PaddingMode::Zero
    } else {
        mode
    };
    let mut items = Vec::with_capacity(target_len);
    for slot in 0..pad_len {
        let steps_left = pad_len - slot;
        let id = match mode {
            PaddingMode::Zero => PAD_ID,
            _ => seq[source_index(mode, n, steps_left)],
        };
        items.push(id);
    }
    items.extend_from_slice(seq);
    Ok(PaddedHistory {
        items,
        pad_len,
        warning,
    })
}
