use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use crate::data::{prefix_windows, SplitExample, Splits};
use crate::error::{Error, Result};
use crate::eval::{hit_rate_at_k, ndcg_at_k, rank_examples};
use crate::model::{Model, ModelConfig, ParameterSet};

/// Examples per gradient buffer. Chunks are reduced in order, so results do
/// not depend on the thread count.
const CHUNK: usize = 8;

/// Which positions of a training window carry a loss.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Every prefix of the window becomes its own example, supervised at
    /// its last position only. Nothing downstream of a prediction point is
    /// visible, even through the global low-pass filter.
    #[default]
    Prefix,
    /// One example per window with a loss at every real position. The
    /// low-pass filter lets position t see item t+1, so this is only sound
    /// without the rescaler (or with alpha = 0).
    Dense,
}

impl std::str::FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prefix" => Ok(Objective::Prefix),
            "dense" => Ok(Objective::Dense),
            other => Err(Error::Parameter(format!(
                "unknown objective '{other}' (prefix, dense)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub objective: Objective,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: Objective::Prefix,
            learning_rate: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 10,
            seed: 42,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.batch_size > 0
            && self.max_epochs > 0
            && (0.0..1.0).contains(&self.adam_beta1)
            && (0.0..1.0).contains(&self.adam_beta2)
            && self.adam_epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "invalid training config: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_ndcg10: f64,
    pub valid_hr10: f64,
    pub wall_time_secs: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub best_valid_ndcg10: Option<f64>,
    /// `patience`, `max_epochs` or `diverged`.
    pub stop_reason: String,
    pub divergence: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: RunRecord,
    /// Parameters from the best validation epoch.
    pub model: Model<f32>,
}

fn dropout_rng(seed: u64, epoch: usize, example: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5DEE_CE66_D1CE_4E5B);
    rng.set_stream(((epoch as u64) << 32) | example as u64);
    rng
}

/// A window and the positions that carry a loss.
struct Supervised {
    example: SplitExample,
    mask: Vec<bool>,
}

fn training_examples(splits: &Splits, objective: Objective) -> Result<Vec<Supervised>> {
    let mut out = Vec::new();
    for ex in &splits.train {
        match objective {
            Objective::Dense => out.push(Supervised {
                mask: ex.position_mask.clone(),
                example: ex.clone(),
            }),
            Objective::Prefix => {
                for p in prefix_windows(ex, splits.padding)? {
                    let mut mask = vec![false; p.input_window.len()];
                    *mask.last_mut().expect("non-empty window") = true;
                    out.push(Supervised { example: p, mask });
                }
            }
        }
    }
    Ok(out)
}

/// Gradient of the batch-mean loss, reduced chunk by chunk in order.
fn batch_gradient(
    model: &Model<f32>,
    train: &[Supervised],
    batch: &[usize],
    seed: u64,
    epoch: usize,
) -> Result<(ParameterSet<f32>, f64, usize)> {
    let count: usize = batch
        .iter()
        .map(|&i| train[i].mask.iter().filter(|&&m| m).count())
        .sum();
    let scale = 1.0 / count.max(1) as f32;
    let work = |chunk: &[usize]| -> Result<(ParameterSet<f32>, f64)> {
        let mut grads = model.params().zeros_like();
        let mut loss = 0.0;
        for &i in chunk {
            let Supervised { example: ex, mask } = &train[i];
            let mut rng = dropout_rng(seed, epoch, i);
            let (sum, _) = model.loss_and_grad(
                &ex.input_window,
                &ex.position_targets,
                mask,
                scale,
                Some(&mut rng),
                &mut grads,
            )?;
            loss += f64::from(sum);
        }
        Ok((grads, loss))
    };
    let chunks: Vec<&[usize]> = batch.chunks(CHUNK).collect();
    #[cfg(feature = "parallel")]
    let parts: Vec<Result<(ParameterSet<f32>, f64)>> = {
        use rayon::prelude::*;
        chunks.par_iter().map(|c| work(c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Result<(ParameterSet<f32>, f64)>> = chunks.iter().map(|c| work(c)).collect();

    let mut parts = parts.into_iter();
    let (mut total, mut loss) = parts.next().expect("non-empty batch")?;
    for part in parts {
        let (g, l) = part?;
        total.add_assign(&g);
        loss += l;
    }
    Ok((total, loss, count))
}

/// Trains from a fresh initialization seeded by `config.seed`. Divergence is
/// not an error: the partial record is returned with `divergence` set.
pub fn train(
    splits: &Splits,
    num_items: usize,
    model_config: &ModelConfig,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    if model_config.max_len != splits.max_len {
        return Err(Error::Parameter(format!(
            "model max_len {} differs from split max_len {}",
            model_config.max_len, splits.max_len
        )));
    }
    if splits.train.is_empty() {
        return Err(Error::Data("no training windows".into()));
    }
    if splits.valid.is_empty() {
        return Err(Error::Data("no validation windows".into()));
    }
    let examples = training_examples(splits, config.objective)?;
    let mut model = Model::<f32>::new(model_config.clone(), num_items, config.seed)?;
    let mut state = AdamState::new(model.params().as_slice().len());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();

    let mut record = RunRecord {
        seed: config.seed,
        epochs: Vec::new(),
        best_epoch: None,
        best_valid_ndcg10: None,
        stop_reason: "max_epochs".into(),
        divergence: None,
    };
    let mut best_params = model.params().clone();
    let mut since_best = 0;

    'epochs: for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let (mut loss_sum, mut loss_count) = (0.0, 0usize);
        for batch in order.chunks(config.batch_size) {
            let step = batch_gradient(&model, &examples, batch, config.seed, epoch).and_then(
                |(grads, loss, count)| {
                    if !loss.is_finite() {
                        return Err(Error::Diverged(format!("non-finite loss in epoch {epoch}")));
                    }
                    adam_step(model.params_mut(), &grads, &mut state, config)?;
                    if !model.params().is_finite() {
                        return Err(Error::Diverged(format!(
                            "parameters overflowed in epoch {epoch}"
                        )));
                    }
                    Ok((loss, count))
                },
            );
            match step {
                Ok((loss, count)) => {
                    loss_sum += loss;
                    loss_count += count;
                }
                Err(Error::Diverged(msg)) => {
                    log::error!("seed {}: {msg}", config.seed);
                    record.stop_reason = "diverged".into();
                    record.divergence = Some(msg);
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }

        let ranks = match rank_examples(&model, &splits.valid) {
            Ok(r) => r,
            Err(Error::Diverged(msg)) => {
                record.stop_reason = "diverged".into();
                record.divergence = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        let ndcg = ndcg_at_k(&ranks, 10)?;
        let improved = record.best_valid_ndcg10.is_none_or(|b| ndcg > b);
        if improved {
            record.best_epoch = Some(epoch);
            record.best_valid_ndcg10 = Some(ndcg);
            best_params = model.params().clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        let rec = EpochRecord {
            epoch,
            train_loss: loss_sum / loss_count.max(1) as f64,
            valid_ndcg10: ndcg,
            valid_hr10: hit_rate_at_k(&ranks, 10)?,
            wall_time_secs: start.elapsed().as_secs_f64(),
            improved,
        };
        log::info!(
            "seed {} epoch {epoch}: loss {:.4} valid NDCG@10 {:.4}",
            config.seed,
            rec.train_loss,
            ndcg
        );
        on_epoch(&rec);
        record.epochs.push(rec);
        if since_best > config.patience {
            record.stop_reason = "patience".into();
            break;
        }
    }
    *model.params_mut() = best_params;
    Ok(TrainOutcome { record, model })
}
