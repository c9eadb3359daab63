use super::ranking::RankRecord;
use crate::error::{Error, Result};

/// Four record subsets plus the three boundaries that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Quartiles<T> {
    pub groups: [Vec<T>; 4],
    pub boundaries: [f64; 3],
    pub warning: Option<String>,
}

/// Quartile index (0..4) for each value. Boundaries are nearest-rank
/// 25/50/75 percentiles; a value tied with a boundary goes to the lower
/// quartile. With `descending`, Q1 holds the largest values.
pub fn quartile_labels(values: &[f64], descending: bool) -> Result<(Vec<usize>, [f64; 3])> {
    if values.len() < 4 {
        return Err(Error::InvalidInput(format!(
            "quartile grouping needs at least 4 users, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput("NaN value in quartile grouping".into()));
    }
    let key = |v: f64| if descending { -v } else { v };
    let mut sorted: Vec<f64> = values.iter().map(|&v| key(v)).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let b = [1, 2, 3].map(|k| sorted[(k * n).div_ceil(4) - 1]);
    let labels = values
        .iter()
        .map(|&v| b.iter().position(|&bound| key(v) <= bound).unwrap_or(3))
        .collect();
    Ok((labels, b.map(key)))
}

fn group(
    records: &[RankRecord],
    values: Vec<f64>,
    descending: bool,
) -> Result<Quartiles<RankRecord>> {
    let (labels, boundaries) = quartile_labels(&values, descending)?;
    let mut groups: [Vec<RankRecord>; 4] = Default::default();
    for (r, q) in records.iter().zip(labels) {
        groups[q].push(r.clone());
    }
    let warning = groups.iter().any(Vec::is_empty).then(|| {
        let sizes = groups.each_ref().map(Vec::len);
        let msg = format!("tied values collapsed the quartiles to sizes {sizes:?}");
        log::warn!("{msg}");
        msg
    });
    Ok(Quartiles {
        groups,
        boundaries,
        warning,
    })
}

/// Q1 = lowest scaled DC (long-term interests), Q4 = highest.
pub fn group_by_scaled_dc(records: &[RankRecord]) -> Result<Quartiles<RankRecord>> {
    group(
        records,
        records.iter().map(|r| r.scaled_dc).collect(),
        false,
    )
}

/// Q1 = targets whose category is most common in the history.
pub fn group_by_target_occurrence(records: &[RankRecord]) -> Result<Quartiles<RankRecord>> {
    group(
        records,
        records
            .iter()
            .map(|r| r.target_category_occurrence as f64)
            .collect(),
        true,
    )
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn rec(i: usize, dc: f64, occ: usize) -> RankRecord {
        RankRecord {
            user_id: format!("u{i}"),
            rank: i + 1,
            scaled_dc: dc,
            target_category_occurrence: occ,
            categories_from_items: false,
        }
    }

    #[test]
    fn eight_distinct_values_two_per_quartile() {
        let recs: Vec<_> = (0..8).map(|i| rec(i, i as f64 / 10.0, i)).collect();
        let q = group_by_scaled_dc(&recs).unwrap();
        assert_eq!(q.groups.each_ref().map(Vec::len), [2, 2, 2, 2]);
        assert_eq!(q.groups[0][0].scaled_dc, 0.0);
        assert!(q.warning.is_none());
    }

    #[test]
    fn identical_values_all_in_first_quartile() {
        let recs: Vec<_> = (0..6).map(|i| rec(i, 0.3, 2)).collect();
        let q = group_by_scaled_dc(&recs).unwrap();
        assert_eq!(q.groups[0].len(), 6);
        assert!(q.warning.is_some());
        let q = group_by_target_occurrence(&recs).unwrap();
        assert_eq!(q.groups[0].len(), 6);
    }

    #[test]
    fn occurrence_orders_descending() {
        let recs: Vec<_> = [9, 7, 2, 1]
            .iter()
            .enumerate()
            .map(|(i, &o)| rec(i, 0.0, o))
            .collect();
        let q = group_by_target_occurrence(&recs).unwrap();
        assert_eq!(q.groups[0][0].target_category_occurrence, 9);
        assert_eq!(q.groups[3][0].target_category_occurrence, 1);
    }

    #[test]
    fn fewer_than_four_is_an_error() {
        let recs: Vec<_> = (0..3).map(|i| rec(i, 0.1, 1)).collect();
        assert!(group_by_scaled_dc(&recs).is_err());
    }

    proptest! {
        #[test]
        fn distinct_values_split_evenly(n in 4usize..200, seed in any::<u64>()) {
            let mut values: Vec<f64> = (0..n).map(|i| i as f64 * 0.37).collect();
            values.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let (labels, _) = quartile_labels(&values, false).unwrap();
            let (desc, _) = quartile_labels(&values, true).unwrap();
            for l in [labels, desc] {
                for q in 0..4 {
                    let size = l.iter().filter(|&&x| x == q).count() as f64;
                    prop_assert!((size - n as f64 / 4.0).abs() <= 1.0);
                }
            }
        }

        #[test]
        fn groups_partition_the_records(values in proptest::collection::vec(0u8..6, 4..60)) {
            let recs: Vec<_> = values.iter().enumerate().map(|(i, &v)| rec(i, v as f64 / 10.0, v as usize)).collect();
            for q in [group_by_scaled_dc(&recs).unwrap(), group_by_target_occurrence(&recs).unwrap()] {
                let mut ids: Vec<&str> = q.groups.iter().flatten().map(|r| r.user_id.as_str()).collect();
                prop_assert_eq!(ids.len(), recs.len());
                ids.sort_unstable();
                ids.dedup();
                prop_assert_eq!(ids.len(), recs.len());
            }
        }

        #[test]
        fn lower_quartiles_hold_lower_values(values in proptest::collection::vec(0.0f64..1.0, 4..60)) {
            let (labels, _) = quartile_labels(&values, false).unwrap();
            for i in 0..values.len() {
                for j in 0..values.len() {
                    if labels[i] < labels[j] {
                        prop_assert!(values[i] < values[j]);
                    }
                }
            }
        }
    }
}
