use anyhow::anyhow;
use bsarec_core::data::SplitSet;
use bsarec_core::eval::{MeanStd, MetricReport};
use bsarec_core::experiment::{canonical_key, value_label, ExperimentConfig, SweepAxis};
use clap::Args;
use serde_json::Value;

use super::eval::{eval_dir, evaluate, metric_names};
use super::seed_dir;
use super::train::{checkpoint_paths, train_all, TrainSummary};
use crate::failure::{Failure, DIVERGED};
use crate::output::{read_json, write_table};

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Configuration key to vary, e.g. `max_len` or `model.padding`.
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated values; each is parsed as JSON, falling back to a string.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
}

fn resolve_axis(cfg: &ExperimentConfig, args: &SweepArgs) -> Result<SweepAxis, Failure> {
    match (&args.axis, &cfg.sweep) {
        (Some(axis), _) => {
            if args.values.is_empty() {
                return Err(Failure::usage("--axis needs --values"));
            }
            let values = args
                .values
                .iter()
                .map(|v| {
                    serde_json::from_str(v.trim())
                        .unwrap_or_else(|_| Value::String(v.trim().to_string()))
                })
                .collect();
            Ok(SweepAxis {
                axis: axis.clone(),
                values,
            })
        }
        (None, Some(s)) if args.values.is_empty() => Ok(s.clone()),
        (None, _) => Err(Failure::usage(
            "no sweep axis: pass --axis/--values or set 'sweep' in the config",
        )),
    }
}

pub fn run(cfg: &ExperimentConfig, args: &SweepArgs) -> Result<(), Failure> {
    let axis = resolve_axis(cfg, args)?;
    let key = canonical_key(&axis.axis).to_string();
    let root = cfg.output_dir.join(format!("sweep-{key}"));
    let names = metric_names();

    let mut header: Vec<String> = vec!["axis".into(), "value".into(), "seed".into()];
    header.extend(names.iter().cloned());
    header.extend(["best_epoch".to_string(), "stop_reason".to_string()]);
    let mut rows = Vec::new();
    let mut summary_rows = Vec::new();
    let mut diverged = Vec::new();

    for value in &axis.values {
        let label = value_label(value);
        let mut run_cfg = cfg
            .with_override(&axis.axis, value.clone())
            .map_err(|e| Failure::usage(e.to_string()))?;
        run_cfg.sweep = None;
        run_cfg.output_dir = root.join(&label);
        run_cfg
            .validate()
            .map_err(|e| Failure::usage(e.to_string()))?;
        log::info!("sweep {key} = {label}");

        let TrainSummary {
            completed,
            diverged: failed,
        } = train_all(&run_cfg)?;
        for seed in &failed {
            diverged.push(format!("{label}/seed-{seed}"));
            rows.push(
                [key.clone(), label.clone(), seed.to_string()]
                    .into_iter()
                    .chain(names.iter().map(|_| String::new()))
                    .chain([String::new(), "diverged".to_string()])
                    .collect(),
            );
        }
        let seeds: Vec<u64> = completed.iter().map(|(s, _)| *s).collect();
        if seeds.is_empty() {
            continue;
        }
        let aggregate = evaluate(
            &run_cfg,
            SplitSet::Test,
            &checkpoint_paths(&run_cfg.output_dir, &seeds),
            &run_cfg.output_dir,
        )?;
        for (seed, record) in &completed {
            let report: MetricReport = read_json(
                &seed_dir(&eval_dir(&run_cfg.output_dir, SplitSet::Test), *seed)
                    .join("metrics.json"),
            )?;
            let mut row = vec![key.clone(), label.clone(), seed.to_string()];
            row.extend(
                names
                    .iter()
                    .map(|n| report.mean(n).map_or(String::new(), |v| v.to_string())),
            );
            row.push(record.best_epoch.map_or(String::new(), |e| e.to_string()));
            row.push(record.stop_reason.clone());
            rows.push(row);
        }
        let mut srow = vec![label.clone(), seeds.len().to_string()];
        for n in &names {
            let v = aggregate.metrics.get(n).copied().unwrap_or(MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            });
            srow.push(v.mean.to_string());
            srow.push(v.std.to_string());
        }
        summary_rows.push(srow);
    }

    write_table(&root.join("sweep.csv"), &header, &rows)?;
    let mut sheader = vec!["value".to_string(), "seeds".to_string()];
    for n in &names {
        sheader.push(format!("{n}_mean"));
        sheader.push(format!("{n}_std"));
    }
    write_table(&root.join("summary.csv"), &sheader, &summary_rows)?;
    println!("{}", root.join("sweep.csv").display());
    if !diverged.is_empty() {
        return Err(Failure::with_code(
            DIVERGED,
            anyhow!("training diverged for {}", diverged.join(", ")),
        ));
    }
    Ok(())
}
