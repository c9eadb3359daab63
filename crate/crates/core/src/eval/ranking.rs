use serde::{Deserialize, Serialize};

use crate::data::{InteractionCorpus, SplitExample, SplitSet};
use crate::error::{Error, Result};
use crate::model::{Model, Real};
use crate::signal::{dense_category_encoding, scaled_dc_component};

/// Outcome of ranking one user's held-out item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub user_id: String,
    /// 1-based rank of the target among all real items.
    pub rank: usize,
    /// Scaled DC of the categories in the history preceding the target.
    pub scaled_dc: f64,
    /// How often the target's category occurs in that history.
    pub target_category_occurrence: usize,
    /// Set when the corpus has no category map and item ids stood in for
    /// categories.
    pub categories_from_items: bool,
}

/// Rank of `target` in `scores` (column 0 is the pad). Ties go to the
/// smaller item id.
pub fn rank_of_target<T: Real>(scores: &[T], target: u32) -> Result<usize> {
    let t = target as usize;
    if t == 0 || t >= scores.len() {
        return Err(Error::InvalidInput(format!(
            "target id {target} outside 1..{}",
            scores.len()
        )));
    }
    let st = scores[t];
    if !st.is_finite() {
        return Err(Error::Diverged(format!(
            "non-finite score for target {target}"
        )));
    }
    let ahead = scores[1..]
        .iter()
        .enumerate()
        .filter(|&(i, &s)| s > st || (s == st && i + 1 < t))
        .count();
    Ok(1 + ahead)
}

/// Ranks of each example's target, with dropout off.
pub fn rank_examples<T: Real>(model: &Model<T>, examples: &[SplitExample]) -> Result<Vec<usize>> {
    let one = |ex: &SplitExample| rank_of_target(&model.score_next(&ex.input_window)?, ex.target);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        examples.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        examples.iter().map(one).collect()
    }
}

/// Ranks every valid or test example and attaches the per-user frequency
/// statistics used by the grouped analyses.
pub fn rank_all_items<T: Real>(
    model: &Model<T>,
    corpus: &InteractionCorpus,
    examples: &[SplitExample],
    set: SplitSet,
) -> Result<Vec<RankRecord>> {
    // items preceding the target
    let held_out = match set {
        SplitSet::Test => 1,
        SplitSet::Valid => 2,
        SplitSet::Train => {
            return Err(Error::InvalidInput(
                "ranking is defined for the valid and test sets".into(),
            ));
        }
    };
    let ranks = rank_examples(model, examples)?;
    let from_items = !corpus.has_categories();
    if from_items {
        log::warn!("no category map: scaled DC is computed over item ids");
    }
    examples
        .iter()
        .zip(ranks)
        .map(|(ex, rank)| {
            let user = corpus.users.get(ex.user).ok_or_else(|| {
                Error::Data(format!("example refers to missing user {}", ex.user))
            })?;
            let prefix = user.items.len().saturating_sub(held_out);
            let (history, target_label): (&[u32], u32) = match &user.categories {
                Some(c) => (&c[..prefix], c[prefix]),
                None => (&user.items[..prefix], user.items[prefix]),
            };
            let scaled_dc = scaled_dc_component(&dense_category_encoding(history)?);
            Ok(RankRecord {
                user_id: user.user_id.clone(),
                rank,
                scaled_dc,
                target_category_occurrence: history.iter().filter(|&&c| c == target_label).count(),
                categories_from_items: from_items,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_winner_ranks_first() {
        let s = [f64::NEG_INFINITY, 0.1, 0.9, 0.3];
        assert_eq!(rank_of_target(&s, 2).unwrap(), 1);
        assert_eq!(rank_of_target(&s, 3).unwrap(), 2);
        assert_eq!(rank_of_target(&s, 1).unwrap(), 3);
    }

    #[test]
    fn ties_break_by_ascending_id() {
        let s = [f64::NEG_INFINITY, 0.5, 0.5, 0.5, 0.5];
        for t in 1..=4 {
            assert_eq!(rank_of_target(&s, t).unwrap(), t as usize);
        }
    }

    #[test]
    fn pad_and_out_of_range_targets_rejected() {
        let s = [0.0f32, 1.0];
        assert!(rank_of_target(&s, 0).is_err());
        assert!(rank_of_target(&s, 2).is_err());
    }
}
