use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use bsarec_core::data::SplitSet;
use bsarec_core::eval::{
    aggregate_seeds, lfc_hfc_norm_profile, metric_report, pad_region_means, rank_all_items,
    welch_t_test, GroupReport, MetricReport, CUTOFFS,
};
use bsarec_core::experiment::ExperimentConfig;
use bsarec_core::model::Model;
use clap::Args;
use serde::{Deserialize, Serialize};

use super::seed_dir;
use super::train::checkpoint_paths;
use crate::cache;
use crate::failure::{Failure, DATA, NO_SIGNIFICANCE};
use crate::output::{read_json, write_csv, write_json, write_table};

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    /// Held-out split to rank.
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: SplitSet,
    /// Explicit checkpoints, labelled 1, 2, ... in order. Defaults to the
    /// configured seeds under the output directory.
    #[arg(long = "checkpoint")]
    pub checkpoints: Vec<PathBuf>,
    /// Output directory of a second evaluated run; adds a Welch t-test per metric.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
}

fn parse_split(s: &str) -> Result<SplitSet, String> {
    match s.parse::<SplitSet>() {
        Ok(SplitSet::Train) => Err("only 'valid' and 'test' can be evaluated".into()),
        Ok(set) => Ok(set),
        Err(e) => Err(e.to_string()),
    }
}

pub fn split_name(set: SplitSet) -> &'static str {
    match set {
        SplitSet::Train => "train",
        SplitSet::Valid => "valid",
        SplitSet::Test => "test",
    }
}

pub fn eval_dir(base: &Path, set: SplitSet) -> PathBuf {
    base.join(format!("eval-{}", split_name(set)))
}

/// Mean LFC/HFC norms inside the padded region of every window that has one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PadRegionSummary {
    pub windows_with_padding: usize,
    pub lfc_norm_mean: f64,
    pub hfc_norm_mean: f64,
}

#[derive(Debug, Serialize)]
struct ProfileRow {
    position: usize,
    pad_fraction: f64,
    lfc_norm_mean: f64,
    hfc_norm_mean: f64,
}

fn norm_profile(
    model: &Model<f32>,
    examples: &[bsarec_core::data::SplitExample],
) -> Result<(Vec<ProfileRow>, Option<PadRegionSummary>), Failure> {
    let len = model.config().max_len;
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); len];
    let (mut pad_lfc, mut pad_hfc, mut padded) = (0.0, 0.0, 0usize);
    for ex in examples {
        let rows = lfc_hfc_norm_profile(model, ex)?;
        for r in &rows {
            let s = &mut sums[r.position];
            s.0 += r.lfc_norm;
            s.1 += r.hfc_norm;
            s.2 += r.is_pad as usize;
        }
        if rows.iter().any(|r| r.is_pad) {
            let (l, h) = pad_region_means(&rows)?;
            pad_lfc += l;
            pad_hfc += h;
            padded += 1;
        }
    }
    let n = examples.len().max(1) as f64;
    let rows = sums
        .iter()
        .enumerate()
        .map(|(position, &(l, h, p))| ProfileRow {
            position,
            pad_fraction: p as f64 / n,
            lfc_norm_mean: l / n,
            hfc_norm_mean: h / n,
        })
        .collect();
    let pad = (padded > 0).then(|| PadRegionSummary {
        windows_with_padding: padded,
        lfc_norm_mean: pad_lfc / padded as f64,
        hfc_norm_mean: pad_hfc / padded as f64,
    });
    Ok((rows, pad))
}

pub fn metric_names() -> Vec<String> {
    ["HR", "NDCG"]
        .iter()
        .flat_map(|m| CUTOFFS.iter().map(move |k| format!("{m}@{k}")))
        .collect()
}

fn write_groups(path: &Path, groups: &[GroupReport]) -> anyhow::Result<()> {
    let names = metric_names();
    let mut header = vec!["quartile".to_string(), "users".to_string()];
    for n in &names {
        header.push(format!("{n}_mean"));
        header.push(format!("{n}_std"));
    }
    let rows: Vec<Vec<String>> = groups
        .iter()
        .map(|g| {
            let mut row = vec![format!("Q{}", g.quartile), g.users.to_string()];
            for n in &names {
                match g.metrics.get(n) {
                    Some(v) => {
                        row.push(v.mean.to_string());
                        row.push(v.std.to_string());
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            row
        })
        .collect();
    write_table(path, &header, &rows)
}

/// Evaluates each checkpoint on `set`, writing per-seed and aggregate outputs
/// under `eval_dir(out, set)`.
pub fn evaluate(
    cfg: &ExperimentConfig,
    set: SplitSet,
    checkpoints: &[(u64, PathBuf)],
    out: &Path,
) -> Result<MetricReport, Failure> {
    if checkpoints.is_empty() {
        return Err(Failure::with_code(
            DATA,
            anyhow!("no checkpoints to evaluate in {}", out.display()),
        ));
    }
    let dir = eval_dir(out, set);
    let mut reports = Vec::new();
    for (seed, path) in checkpoints {
        let model = Model::<f32>::load(path)?;
        let mc = model.config();
        let prepared = cache::prepare(cfg, mc.max_len, mc.padding)?;
        if prepared.corpus.item_count() != model.num_items() {
            return Err(Failure::with_code(
                DATA,
                anyhow!(
                    "{} was trained on {} items but the corpus has {}",
                    path.display(),
                    model.num_items(),
                    prepared.corpus.item_count()
                ),
            ));
        }
        let examples = prepared.splits.get(set);
        let records = rank_all_items(&model, &prepared.corpus, examples, set)?;
        let report = metric_report(&records, *seed)?;
        let (profile, pad) = norm_profile(&model, examples)?;

        let seed_out = seed_dir(&dir, *seed);
        write_json(&seed_out.join("metrics.json"), &report)?;
        write_csv(&seed_out.join("ranks.csv"), &records)?;
        write_csv(&seed_out.join("norm_profile.csv"), &profile)?;
        if let Some(pad) = &pad {
            write_json(&seed_out.join("pad_region.json"), pad)?;
        }
        log::info!(
            "seed {seed}: HR@10 {:.4} NDCG@10 {:.4} over {} users",
            report.mean("HR@10").unwrap_or(f64::NAN),
            report.mean("NDCG@10").unwrap_or(f64::NAN),
            report.users
        );
        reports.push(report);
    }
    let aggregate = aggregate_seeds(&reports)?;
    write_json(&dir.join("metrics.json"), &aggregate)?;
    write_groups(&dir.join("groups_scaled_dc.csv"), &aggregate.by_scaled_dc)?;
    write_groups(
        &dir.join("groups_target_occurrence.csv"),
        &aggregate.by_target_occurrence,
    )?;
    Ok(aggregate)
}

/// Per-seed values of every metric, read back from an evaluated run.
fn seed_metrics(out: &Path, set: SplitSet) -> anyhow::Result<BTreeMap<String, Vec<f64>>> {
    let agg: MetricReport = read_json(&eval_dir(out, set).join("metrics.json"))?;
    let mut values: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for seed in &agg.seeds {
        let r: MetricReport =
            read_json(&seed_dir(&eval_dir(out, set), *seed).join("metrics.json"))?;
        for (k, v) in r.metrics {
            values.entry(k).or_default().push(v.mean);
        }
    }
    Ok(values)
}

fn significance(out: &Path, baseline: &Path, set: SplitSet) -> Result<(), Failure> {
    let ours = seed_metrics(out, set)?;
    let theirs = seed_metrics(baseline, set)?;
    let n_ours = ours.values().map(Vec::len).min().unwrap_or(0);
    let n_theirs = theirs.values().map(Vec::len).min().unwrap_or(0);
    if n_ours < 2 || n_theirs < 2 {
        return Err(Failure::with_code(
            NO_SIGNIFICANCE,
            anyhow!(
                "significance test needs at least 2 seeds per side (have {n_ours} and {n_theirs})"
            ),
        ));
    }
    let header: Vec<String> = [
        "metric",
        "mean",
        "baseline_mean",
        "t",
        "degrees_of_freedom",
        "p",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rows = Vec::new();
    for name in metric_names() {
        let (Some(a), Some(b)) = (ours.get(&name), theirs.get(&name)) else {
            continue;
        };
        let w = welch_t_test(a, b)?;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        rows.push(vec![
            name,
            mean(a).to_string(),
            mean(b).to_string(),
            w.t.to_string(),
            w.degrees_of_freedom.to_string(),
            w.p.to_string(),
        ]);
    }
    write_table(&eval_dir(out, set).join("significance.csv"), &header, &rows)?;
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, args: &EvalArgs) -> Result<(), Failure> {
    let checkpoints = if args.checkpoints.is_empty() {
        checkpoint_paths(&cfg.output_dir, &cfg.seeds)
    } else {
        args.checkpoints
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u64 + 1, p.clone()))
            .collect()
    };
    let aggregate = evaluate(cfg, args.split, &checkpoints, &cfg.output_dir)?;
    for name in metric_names() {
        if let Some(v) = aggregate.metrics.get(&name) {
            println!("{name}\t{:.4}\t{:.4}", v.mean, v.std);
        }
    }
    if let Some(baseline) = &args.baseline {
        significance(&cfg.output_dir, baseline, args.split)?;
    }
    Ok(())
}
