use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::quartile::{group_by_scaled_dc, group_by_target_occurrence};
use super::ranking::RankRecord;
use crate::error::{Error, Result};

/// Top-k cutoffs reported everywhere.
pub const CUTOFFS: [usize; 3] = [5, 10, 20];

fn check(ranks: &[usize], k: usize) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::InvalidInput("no ranks to evaluate".into()));
    }
    if k == 0 {
        return Err(Error::Parameter("cutoff k must be positive".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidInput("ranks are 1-based".into()));
    }
    Ok(())
}

pub fn hit_rate_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    check(ranks, k)?;
    Ok(ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64)
}

/// Single-target NDCG: `1 / log2(rank + 1)` inside the cutoff.
pub fn ndcg_at_k(ranks: &[usize], k: usize) -> Result<f64> {
    check(ranks, k)?;
    let total: f64 = ranks
        .iter()
        .filter(|&&r| r <= k)
        .map(|&r| 1.0 / ((r + 1) as f64).log2())
        .sum();
    Ok(total / ranks.len() as f64)
}

/// `HR@k` and `NDCG@k` for every cutoff, keyed by name.
pub fn metric_values(ranks: &[usize]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for k in CUTOFFS {
        out.insert(format!("HR@{k}"), hit_rate_at_k(ranks, k)?);
        out.insert(format!("NDCG@{k}"), ndcg_at_k(ranks, k)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation across seeds; 0 for a single seed.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    /// 1..=4
    pub quartile: usize,
    pub users: usize,
    pub metrics: BTreeMap<String, MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub seeds: Vec<u64>,
    pub users: usize,
    pub metrics: BTreeMap<String, MeanStd>,
    /// Q1 = lowest scaled DC.
    pub by_scaled_dc: Vec<GroupReport>,
    /// Q1 = target categories most common in the history.
    pub by_target_occurrence: Vec<GroupReport>,
}

impl MetricReport {
    pub fn mean(&self, metric: &str) -> Option<f64> {
        self.metrics.get(metric).map(|m| m.mean)
    }
}

fn single(values: BTreeMap<String, f64>) -> BTreeMap<String, MeanStd> {
    values
        .into_iter()
        .map(|(k, v)| (k, MeanStd { mean: v, std: 0.0 }))
        .collect()
}

fn group_reports(groups: &[Vec<RankRecord>; 4]) -> Result<Vec<GroupReport>> {
    groups
        .iter()
        .enumerate()
        .map(|(q, g)| {
            let ranks: Vec<usize> = g.iter().map(|r| r.rank).collect();
            let metrics = if ranks.is_empty() {
                BTreeMap::new()
            } else {
                single(metric_values(&ranks)?)
            };
            Ok(GroupReport {
                quartile: q + 1,
                users: ranks.len(),
                metrics,
            })
        })
        .collect()
}

/// Report for one seed. Grouped breakdowns are left empty when there are
/// fewer than four users.
pub fn metric_report(records: &[RankRecord], seed: u64) -> Result<MetricReport> {
    let ranks: Vec<usize> = records.iter().map(|r| r.rank).collect();
    let metrics = single(metric_values(&ranks)?);
    let (by_scaled_dc, by_target_occurrence) = if records.len() >= 4 {
        (
            group_reports(&group_by_scaled_dc(records)?.groups)?,
            group_reports(&group_by_target_occurrence(records)?.groups)?,
        )
    } else {
        (Vec::new(), Vec::new())
    };
    Ok(MetricReport {
        seeds: vec![seed],
        users: records.len(),
        metrics,
        by_scaled_dc,
        by_target_occurrence,
    })
}

fn aggregate_map<'a>(
    maps: impl Iterator<Item = &'a BTreeMap<String, MeanStd>>,
) -> BTreeMap<String, MeanStd> {
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in maps {
        for (k, v) in m {
            values.entry(k.clone()).or_default().push(v.mean);
        }
    }
    values
        .into_iter()
        .map(|(k, v)| (k, MeanStd::of(&v)))
        .collect()
}

fn aggregate_groups(groups: &[&Vec<GroupReport>]) -> Vec<GroupReport> {
    (1..=4)
        .filter_map(|q| {
            let members: Vec<&GroupReport> = groups
                .iter()
                .filter_map(|g| g.iter().find(|r| r.quartile == q))
                .collect();
            if members.is_empty() {
                return None;
            }
            Some(GroupReport {
                quartile: q,
                users: members.iter().map(|g| g.users).sum::<usize>() / members.len(),
                metrics: aggregate_map(members.iter().map(|g| &g.metrics)),
            })
        })
        .collect()
}

/// Mean and sample standard deviation of each per-seed mean.
pub fn aggregate_seeds(reports: &[MetricReport]) -> Result<MetricReport> {
    if reports.is_empty() {
        return Err(Error::InvalidInput(
            "no per-seed reports to aggregate".into(),
        ));
    }
    let scaled: Vec<&Vec<GroupReport>> = reports.iter().map(|r| &r.by_scaled_dc).collect();
    let occurrence: Vec<&Vec<GroupReport>> =
        reports.iter().map(|r| &r.by_target_occurrence).collect();
    Ok(MetricReport {
        seeds: reports
            .iter()
            .flat_map(|r| r.seeds.iter().copied())
            .collect(),
        users: reports[0].users,
        metrics: aggregate_map(reports.iter().map(|r| &r.metrics)),
        by_scaled_dc: aggregate_groups(&scaled),
        by_target_occurrence: aggregate_groups(&occurrence),
    })
}
