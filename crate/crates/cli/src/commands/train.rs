use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use bsarec_core::experiment::ExperimentConfig;
use bsarec_core::training::{train, RunRecord};

use super::seed_dir;
use crate::cache;
use crate::failure::{Failure, DIVERGED};
use crate::output::{read_json, write_json};

/// Marks a finished seed; its presence makes re-runs skip the seed.
pub const RECORD: &str = "record.json";
pub const DIVERGED_RECORD: &str = "record.diverged.json";
pub const CHECKPOINT: &str = "checkpoint.json";
pub const EPOCH_LOG: &str = "run.jsonl";

#[derive(Debug, Default)]
pub struct TrainSummary {
    pub completed: Vec<(u64, RunRecord)>,
    pub diverged: Vec<u64>,
}

impl TrainSummary {
    pub fn into_result(self) -> Result<Self, Failure> {
        if self.diverged.is_empty() {
            Ok(self)
        } else {
            Err(Failure::with_code(
                DIVERGED,
                anyhow::anyhow!("training diverged for seed(s) {:?}", self.diverged),
            ))
        }
    }
}

pub fn checkpoint_paths(out: &Path, seeds: &[u64]) -> Vec<(u64, PathBuf)> {
    seeds
        .iter()
        .map(|&s| (s, seed_dir(out, s).join(CHECKPOINT)))
        .filter(|(s, p)| {
            let ok = p.exists();
            if !ok {
                log::warn!("seed {s}: no checkpoint at {}", p.display());
            }
            ok
        })
        .collect()
}

/// Trains every configured seed under `cfg.output_dir`. Seeds that already
/// have a run record are loaded instead of retrained.
pub fn train_all(cfg: &ExperimentConfig) -> Result<TrainSummary, Failure> {
    let out = &cfg.output_dir;
    write_json(&out.join("config.json"), cfg)?;
    let prepared = cache::prepare(cfg, cfg.model.max_len, cfg.model.padding)?;
    let mut summary = TrainSummary::default();
    for &seed in &cfg.seeds {
        let dir = seed_dir(out, seed);
        let record_path = dir.join(RECORD);
        if record_path.exists() && dir.join(CHECKPOINT).exists() {
            log::info!("seed {seed}: already trained, skipping");
            summary.completed.push((seed, read_json(&record_path)?));
            continue;
        }
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        let _ = fs::remove_file(dir.join(DIVERGED_RECORD));

        let mut train_cfg = cfg.train.clone();
        train_cfg.seed = seed;
        let log_path = dir.join(EPOCH_LOG);
        let mut epoch_log = BufWriter::new(
            File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
        );
        let mut log_error = None;
        let outcome = train(
            &prepared.splits,
            prepared.corpus.item_count(),
            &cfg.model,
            &train_cfg,
            |e| {
                log::info!(
                    "seed {seed} epoch {}: loss {:.4} valid NDCG@10 {:.4} HR@10 {:.4}{}",
                    e.epoch,
                    e.train_loss,
                    e.valid_ndcg10,
                    e.valid_hr10,
                    if e.improved { " *" } else { "" }
                );
                let line = serde_json::to_string(e).expect("epoch record serializes");
                if let Err(err) = writeln!(epoch_log, "{line}") {
                    log_error.get_or_insert(err);
                }
            },
        )?;
        if let Some(err) = log_error {
            return Err(anyhow::Error::from(err)
                .context(format!("writing {}", log_path.display()))
                .into());
        }
        epoch_log.flush()?;

        if outcome.record.stop_reason == "diverged" {
            log::error!(
                "seed {seed}: {}",
                outcome
                    .record
                    .divergence
                    .as_deref()
                    .unwrap_or("training diverged")
            );
            write_json(&dir.join(DIVERGED_RECORD), &outcome.record)?;
            summary.diverged.push(seed);
            continue;
        }
        outcome.model.save(&dir.join(CHECKPOINT))?;
        write_json(&record_path, &outcome.record)?;
        log::info!(
            "seed {seed}: stopped ({}) best epoch {:?}",
            outcome.record.stop_reason,
            outcome.record.best_epoch
        );
        summary.completed.push((seed, outcome.record));
    }
    Ok(summary)
}

pub fn run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let summary = train_all(cfg)?.into_result()?;
    for (seed, r) in &summary.completed {
        println!(
            "seed {seed}: best epoch {} valid NDCG@10 {:.4}",
            r.best_epoch.map_or("-".into(), |e| e.to_string()),
            r.best_valid_ndcg10.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
