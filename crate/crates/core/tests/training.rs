use std::sync::Arc;

use bsarec_core::data::{leave_last_out_split, parse_corpus_str, synthetic, Splits};
use bsarec_core::eval::{ndcg_at_k, rank_examples};
use bsarec_core::model::{Layout, ModelConfig, ParameterSet};
use bsarec_core::signal::PaddingMode;
use bsarec_core::training::{adam_step, train, AdamState, Objective, TrainConfig, TrainOutcome};
use proptest::prelude::*;

fn toy() -> (Splits, usize) {
    let (corpus, _) = parse_corpus_str(&synthetic::successor_corpus(10, 20, 8)).unwrap();
    (
        leave_last_out_split(&corpus, 10, PaddingMode::Zero).unwrap(),
        corpus.item_count(),
    )
}

fn model_config() -> ModelConfig {
    ModelConfig {
        hidden_size: 16,
        max_len: 10,
        cutoff: 3,
        dropout: 0.1,
        ..ModelConfig::default()
    }
}

fn run(cfg: &TrainConfig) -> TrainOutcome {
    let (splits, n) = toy();
    train(&splits, n, &model_config(), cfg, |_| {}).unwrap()
}

#[test]
fn same_seed_same_run() {
    let cfg = TrainConfig {
        max_epochs: 4,
        batch_size: 8,
        learning_rate: 5e-3,
        ..TrainConfig::default()
    };
    let a = run(&cfg);
    let b = run(&cfg);
    let losses = |o: &TrainOutcome| {
        o.record
            .epochs
            .iter()
            .map(|e| e.train_loss.to_bits())
            .collect::<Vec<_>>()
    };
    assert_eq!(losses(&a), losses(&b));
    assert_eq!(a.model.params(), b.model.params());

    let c = run(&TrainConfig { seed: 7, ..cfg });
    assert_ne!(losses(&a), losses(&c));
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = TrainConfig {
        max_epochs: 2,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let on = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap();
        pool.install(|| run(&cfg))
    };
    let (a, b) = (on(1), on(4));
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(a.record.epochs[1].train_loss, b.record.epochs[1].train_loss);
}

#[test]
fn patience_zero_stops_at_first_non_improvement() {
    let out = run(&TrainConfig {
        patience: 0,
        max_epochs: 60,
        learning_rate: 1e-2,
        batch_size: 16,
        ..TrainConfig::default()
    });
    let epochs = &out.record.epochs;
    let last = epochs.last().unwrap();
    assert_eq!(out.record.stop_reason, "patience");
    assert!(!last.improved);
    assert!(epochs[..epochs.len() - 1].iter().all(|e| e.improved));
    assert_eq!(out.record.best_epoch, Some(last.epoch - 1));
}

#[test]
fn returned_model_is_the_best_epoch() {
    let (splits, n) = toy();
    let cfg = TrainConfig {
        patience: 3,
        max_epochs: 30,
        learning_rate: 1e-2,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let out = train(&splits, n, &model_config(), &cfg, |_| {}).unwrap();
    let best = out.record.best_valid_ndcg10.unwrap();
    let max = out
        .record
        .epochs
        .iter()
        .map(|e| e.valid_ndcg10)
        .fold(f64::MIN, f64::max);
    assert_eq!(best, max);
    let best_epoch = out.record.best_epoch.unwrap();
    assert_eq!(out.record.epochs[best_epoch - 1].valid_ndcg10, best);
    let ranks = rank_examples(&out.model, &splits.valid).unwrap();
    assert_eq!(ndcg_at_k(&ranks, 10).unwrap(), best);
    let pad = out.model.params().layout().pad_row();
    assert!(out.model.params().get(&pad).iter().all(|&v| v == 0.0));
}

#[test]
fn memorization_loss_falls_over_first_epochs() {
    let out = run(&TrainConfig {
        max_epochs: 5,
        patience: 10,
        learning_rate: 1e-3,
        batch_size: 8,
        ..TrainConfig::default()
    });
    let losses: Vec<f64> = out.record.epochs.iter().map(|e| e.train_loss).collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn dense_objective_trains_without_rescaler() {
    let (splits, n) = toy();
    let cfg = TrainConfig {
        objective: Objective::Dense,
        max_epochs: 3,
        batch_size: 4,
        ..TrainConfig::default()
    };
    let mc = ModelConfig {
        alpha: 0.0,
        ..model_config()
    };
    let out = train(&splits, n, &mc, &cfg, |_| {}).unwrap();
    assert_eq!(out.record.epochs.len(), 3);
    assert!(out.record.epochs.iter().all(|e| e.train_loss.is_finite()));
}

#[test]
fn divergence_is_recorded_not_raised() {
    let out = run(&TrainConfig {
        max_epochs: 5,
        learning_rate: 1e30,
        ..TrainConfig::default()
    });
    assert_eq!(out.record.stop_reason, "diverged");
    assert!(out.record.divergence.is_some());
    assert!(out.model.params().is_finite());
}

#[test]
fn epoch_callback_sees_every_epoch() {
    let (splits, n) = toy();
    let mut seen = Vec::new();
    let cfg = TrainConfig {
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let out = train(&splits, n, &model_config(), &cfg, |e| seen.push(e.epoch)).unwrap();
    assert_eq!(seen, vec![1, 2, 3]);
    assert_eq!(out.record.stop_reason, "max_epochs");
}

#[test]
fn mismatched_window_length_rejected() {
    let (splits, n) = toy();
    let mc = ModelConfig {
        max_len: 12,
        ..model_config()
    };
    assert!(train(&splits, n, &mc, &TrainConfig::default(), |_| {}).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn projection_survives_arbitrary_updates(
        steps in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 8), 1..12),
        lr in 1e-4f64..2.0,
    ) {
        let cfg = ModelConfig { hidden_size: 8, num_layers: 1, max_len: 4, cutoff: 2, ..ModelConfig::default() };
        let layout = Arc::new(Layout::new(&cfg, 5));
        let mut p = ParameterSet::<f64>::init(layout.clone(), 0.1, 1);
        let mut state = AdamState::new(layout.total);
        let tc = TrainConfig { learning_rate: lr, ..TrainConfig::default() };
        for g in steps {
            let mut grads = p.zeros_like();
            let n = grads.as_slice().len();
            for (i, v) in grads.as_mut_slice().iter_mut().enumerate() {
                *v = g[i % 8] * ((i % 5) as f64 - 2.0) / n as f64 * 100.0;
            }
            adam_step(&mut p, &grads, &mut state, &tc).unwrap();
            prop_assert!(p.get(&layout.layers[0].beta).iter().all(|&b| b >= 0.0));
            prop_assert!(p.get(&layout.pad_row()).iter().all(|&v| v == 0.0));
        }
    }
}
