use anyhow::anyhow;
use bsarec_core::data::InteractionCorpus;
use bsarec_core::eval::MeanStd;
use bsarec_core::experiment::ExperimentConfig;
use bsarec_core::signal::{dense_category_encoding, scaled_dc_component};
use serde::{Deserialize, Serialize};

use crate::cache;
use crate::failure::{Failure, DATA};
use crate::output::{write_csv, write_json};

/// Occurrence counts at or above this share the last bucket.
pub const OCCURRENCE_CAP: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledDcSummary {
    pub users: usize,
    /// False when no category map was given and item ids stood in for categories.
    pub uses_category_map: bool,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UserRow {
    pub user_id: String,
    pub length: usize,
    pub unique_categories: u32,
    pub scaled_dc: f64,
    pub target_category_occurrence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccurrenceRow {
    /// Times the last item's category appears earlier in the history; the
    /// final bucket counts everything at or above the cap.
    pub occurrence: usize,
    pub users: usize,
    pub proportion: f64,
}

/// Scaled DC over each full history, and the occurrence of the final item's
/// category among the items before it.
pub fn user_rows(corpus: &InteractionCorpus) -> bsarec_core::Result<Vec<UserRow>> {
    corpus
        .users
        .iter()
        .map(|u| {
            let labels = u.categories.as_deref().unwrap_or(&u.items);
            let dense = dense_category_encoding(labels)?;
            let (target, history) = labels.split_last().expect("histories are never empty");
            Ok(UserRow {
                user_id: u.user_id.clone(),
                length: labels.len(),
                unique_categories: dense.unique_count(),
                scaled_dc: scaled_dc_component(&dense),
                target_category_occurrence: history.iter().filter(|c| *c == target).count(),
            })
        })
        .collect()
}

pub fn summarize(rows: &[UserRow], uses_category_map: bool) -> ScaledDcSummary {
    let mut v: Vec<f64> = rows.iter().map(|r| r.scaled_dc).collect();
    v.sort_by(f64::total_cmp);
    let ms = MeanStd::of(&v);
    let n = v.len();
    let median = if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    };
    ScaledDcSummary {
        users: n,
        uses_category_map,
        mean: ms.mean,
        std: ms.std,
        median,
        min: v.first().copied().unwrap_or(f64::NAN),
        max: v.last().copied().unwrap_or(f64::NAN),
    }
}

pub fn occurrence_distribution(rows: &[UserRow]) -> Vec<OccurrenceRow> {
    let mut counts = [0usize; OCCURRENCE_CAP + 1];
    for r in rows {
        counts[r.target_category_occurrence.min(OCCURRENCE_CAP)] += 1;
    }
    let total = rows.len().max(1) as f64;
    counts
        .iter()
        .enumerate()
        .map(|(occurrence, &users)| OccurrenceRow {
            occurrence,
            users,
            proportion: users as f64 / total,
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let prepared = cache::prepare(cfg, cfg.model.max_len, cfg.model.padding)?;
    let corpus = &prepared.corpus;
    if corpus.users.is_empty() {
        return Err(Failure::with_code(DATA, anyhow!("corpus has no users")));
    }
    let with_map = corpus.has_categories();
    if !with_map {
        log::warn!("no category map: item ids stand in for categories");
    }
    let rows = user_rows(corpus)?;
    let summary = summarize(&rows, with_map);
    let dir = cfg.output_dir.join("analysis");
    write_json(&dir.join("scaled_dc_summary.json"), &summary)?;
    write_csv(&dir.join("scaled_dc_users.csv"), &rows)?;
    write_csv(
        &dir.join("occurrence_distribution.csv"),
        &occurrence_distribution(&rows),
    )?;
    println!(
        "{} users: mean scaled DC {:.5} (std {:.5})",
        summary.users, summary.mean, summary.std
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use bsarec_core::data::parse_corpus_str;

    use super::*;

    #[test]
    fn single_category_corpus_has_zero_scaled_dc() {
        let (c, _) = parse_corpus_str("u1 a a a a\nu2 a a a\n").unwrap();
        let rows = user_rows(&c).unwrap();
        assert!(rows.iter().all(|r| r.scaled_dc == 0.0));
        assert_eq!(rows[0].target_category_occurrence, 3);
        assert_eq!(summarize(&rows, false).mean, 0.0);
    }

    #[test]
    fn occurrences_are_capped() {
        let mut text = String::from("u1");
        for _ in 0..40 {
            text.push_str(" a");
        }
        text.push_str("\nu2 a b c\n");
        let (c, _) = parse_corpus_str(&text).unwrap();
        let dist = occurrence_distribution(&user_rows(&c).unwrap());
        assert_eq!(dist.len(), OCCURRENCE_CAP + 1);
        assert_eq!(dist[OCCURRENCE_CAP].users, 1);
        assert_eq!(dist[0].users, 1);
        assert_eq!(dist.iter().map(|r| r.proportion).sum::<f64>(), 1.0);
    }
}
