use serde::{Deserialize, Serialize};

use super::corpus::InteractionCorpus;
use crate::error::Result;
use crate::signal::{pad_history, PaddingMode, PAD_ID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSet {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for SplitSet {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitSet::Train),
            "valid" | "validation" => Ok(SplitSet::Valid),
            "test" => Ok(SplitSet::Test),
            other => Err(crate::Error::Parameter(format!("unknown split '{other}'"))),
        }
    }
}

/// One fixed-length model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitExample {
    /// Index of the user in the corpus.
    pub user: usize,
    pub input_window: Vec<u32>,
    /// Next-item label per position, [`PAD_ID`] where there is none.
    pub position_targets: Vec<u32>,
    /// Label of the last position.
    pub target: u32,
    /// True on positions holding real history (not padding).
    pub position_mask: Vec<bool>,
}

impl SplitExample {
    pub fn history_len(&self) -> usize {
        self.position_mask.iter().filter(|m| **m).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub max_len: usize,
    pub padding: PaddingMode,
    pub train: Vec<SplitExample>,
    pub valid: Vec<SplitExample>,
    pub test: Vec<SplitExample>,
    /// Users whose train input is empty (history of exactly three items).
    pub users_without_train: usize,
}

impl Splits {
    pub fn get(&self, set: SplitSet) -> &[SplitExample] {
        match set {
            SplitSet::Train => &self.train,
            SplitSet::Valid => &self.valid,
            SplitSet::Test => &self.test,
        }
    }
}

/// Truncates `history` to its `max_len` most recent items and pads it.
///
/// `next_items[i]` is the label for `history[i]`.
pub fn make_window(
    user: usize,
    history: &[u32],
    next_items: &[u32],
    max_len: usize,
    padding: PaddingMode,
) -> Result<SplitExample> {
    debug_assert_eq!(history.len(), next_items.len());
    let start = history.len().saturating_sub(max_len);
    let recent = &history[start..];
    let padded = pad_history(recent, max_len, padding)?;
    let pad = padded.pad_len;
    let mut position_targets = vec![PAD_ID; max_len];
    position_targets[pad..].copy_from_slice(&next_items[start..]);
    let position_mask = (0..max_len).map(|i| i >= pad).collect();
    Ok(SplitExample {
        user,
        input_window: padded.items,
        target: position_targets[max_len - 1],
        position_targets,
        position_mask,
    })
}

/// Every prefix of the real part of `example`, re-padded to the same length.
/// The k-th window ends at history item k and is labelled with its successor.
pub fn prefix_windows(example: &SplitExample, padding: PaddingMode) -> Result<Vec<SplitExample>> {
    let max_len = example.input_window.len();
    let (history, next): (Vec<u32>, Vec<u32>) = (0..max_len)
        .filter(|&t| example.position_mask[t])
        .map(|t| (example.input_window[t], example.position_targets[t]))
        .unzip();
    (1..=history.len())
        .map(|k| make_window(example.user, &history[..k], &next[..k], max_len, padding))
        .collect()
}

/// Per user: the last item is the test label, the one before it the
/// validation label, and everything up to the third-to-last item supervises
/// training with next-item targets at every position.
pub fn leave_last_out_split(
    corpus: &InteractionCorpus,
    max_len: usize,
    padding: PaddingMode,
) -> Result<Splits> {
    if max_len == 0 {
        return Err(crate::Error::Parameter(
            "window length must be positive".into(),
        ));
    }
    let mut splits = Splits {
        max_len,
        padding,
        ..Default::default()
    };
    for (u, user) in corpus.users.iter().enumerate() {
        let items = &user.items;
        let n = items.len();
        if n < super::MIN_HISTORY_LEN {
            return Err(crate::Error::Data(format!(
                "user '{}' has {n} items, need {}",
                user.user_id,
                super::MIN_HISTORY_LEN
            )));
        }
        splits.test.push(make_window(
            u,
            &items[..n - 1],
            &items[1..],
            max_len,
            padding,
        )?);
        splits.valid.push(make_window(
            u,
            &items[..n - 2],
            &items[1..n - 1],
            max_len,
            padding,
        )?);
        if n > 3 {
            splits.train.push(make_window(
                u,
                &items[..n - 3],
                &items[1..n - 2],
                max_len,
                padding,
            )?);
        } else {
            splits.users_without_train += 1;
        }
    }
    Ok(splits)
}
