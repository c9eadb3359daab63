//! Acceptance suite: one PASS/FAIL/BLOCKED line per criterion.
//!
//! Criteria 4-7 need the LastFM corpus (`user item item ...` per line).
//! Point `BSAREC_LASTFM` at it to run them; without it they report BLOCKED
//! and do not count as passing. `BSAREC_LASTFM_ALPHA` and `BSAREC_LASTFM_C`
//! skip the hyperparameter grid; `BSAREC_LASTFM_MAX_EPOCHS` caps training for
//! quick end-to-end runs.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::Instant;

use bsarec_core::data::{
    compute_stats, leave_last_out_split, parse_corpus, parse_corpus_str, synthetic,
    InteractionCorpus, Splits,
};
use bsarec_core::eval::{
    hit_rate_at_k, lfc_hfc_norm_profile, metric_values, ndcg_at_k, pad_region_means,
    quartile_labels, rank_examples, welch_t_test,
};
use bsarec_core::model::{Model, ModelConfig};
use bsarec_core::signal::{
    band_split, dense_category_encoding, forward_dft, haar_analysis, haar_synthesis,
    high_freq_component, inverse_dft, low_freq_component, max_cutoff, pad_history, rescale,
    scaled_dc_component, PaddingMode, RealSequence, SpectralBackend,
};
use bsarec_core::training::{gradient_check, train, GradientCheckConfig, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ROUND_TRIP_TOL: f64 = 1e-9;
const GRADIENT_TOL: f64 = 1e-4;
const TIME_LIMIT_SECS: f64 = 60.0;
const REFERENCE_HR10: f64 = 0.0703;
const REFERENCE_BAND: f64 = 0.20;
const BACKEND_BAND: f64 = 0.15;
const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const LASTFM_ENV: &str = "BSAREC_LASTFM";

type Criterion = (&'static str, fn() -> Outcome);

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn random_seq(rng: &mut ChaCha8Rng, len: usize) -> RealSequence {
    RealSequence::new((0..len).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn property_suite() -> Outcome {
    let start = Instant::now();
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;

    for _ in 0..200 {
        let len = rng.random_range(2..=64);
        let x = random_seq(&mut rng, len);
        for backend in SpectralBackend::ALL {
            let cmax = max_cutoff(len, backend).unwrap_or(len);
            let c = rng.random_range(1..=cmax);
            let (low, high) = band_split(&x, c, backend).unwrap();
            let sum: Vec<f64> = low.iter().zip(high.iter()).map(|(a, b)| a + b).collect();
            let e = max_diff(&sum, x.as_slice());
            worst = worst.max(e);
            check("low + high reconstructs x", e <= ROUND_TRIP_TOL);
            let same = rescale(&x, c, 1.0, backend).unwrap();
            check(
                "rescale with unit weight is identity",
                max_diff(same.as_slice(), x.as_slice()) <= ROUND_TRIP_TOL,
            );
            let full = rescale(&x, cmax, rng.random_range(0.0..4.0), backend).unwrap();
            check(
                "rescale at full cutoff is identity",
                max_diff(full.as_slice(), x.as_slice()) <= ROUND_TRIP_TOL,
            );
        }
        let spec = forward_dft(&x);
        let back = inverse_dft(&spec);
        let e = max_diff(back.as_slice(), x.as_slice());
        worst = worst.max(e);
        check("DFT round trip", e <= ROUND_TRIP_TOL);
        let energy: f64 = x.iter().map(|v| v * v).sum();
        check(
            "Parseval",
            (spec.energy() - energy).abs() <= ROUND_TRIP_TOL * energy.max(1.0),
        );
        let levels = rng.random_range(1..=(usize::BITS - 1 - len.leading_zeros()) as usize);
        let w = haar_analysis(&x, levels).unwrap();
        let e = max_diff(haar_synthesis(&w).as_slice(), x.as_slice());
        worst = worst.max(e);
        check("DWT round trip", e <= ROUND_TRIP_TOL);
    }

    let impulse = RealSequence::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let low = low_freq_component(&impulse, 1, SpectralBackend::Fourier).unwrap();
    check(
        "DC-only low band is the mean",
        max_diff(low.as_slice(), &[0.25; 4]) <= 1e-12,
    );
    let high = high_freq_component(&impulse, 1, SpectralBackend::Fourier).unwrap();
    check(
        "high band subtracts the mean",
        max_diff(high.as_slice(), &[0.75, -0.25, -0.25, -0.25]) <= 1e-12,
    );
    let r = rescale(&impulse, 1, 2.0, SpectralBackend::Fourier).unwrap();
    check(
        "rescale example",
        max_diff(r.as_slice(), &[1.75, -0.25, -0.25, -0.25]) <= 1e-12,
    );
    let ramp = RealSequence::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    let wl = low_freq_component(&ramp, 2, SpectralBackend::Wavelet).unwrap();
    check(
        "Haar low band example",
        max_diff(wl.as_slice(), &[1.5, 1.5, 3.5, 3.5]) <= 1e-12,
    );
    let residual = high_freq_component(&ramp, 1, SpectralBackend::Residual).unwrap();
    check(
        "residual high band is zero",
        residual.iter().all(|v| *v == 0.0),
    );

    let (a, b, c) = (1, 2, 3);
    let pads = [
        (PaddingMode::Zero, [0, 0, 0, a, b, c]),
        (PaddingMode::Reflect, [b, c, b, a, b, c]),
        (PaddingMode::Symmetric, [c, b, a, a, b, c]),
        (PaddingMode::Cyclic, [a, b, c, a, b, c]),
    ];
    for (mode, want) in pads {
        check(
            &format!("{mode} padding example"),
            pad_history(&[a, b, c], 6, mode).unwrap().items == want,
        );
    }

    let dc = |labels: &[u32]| scaled_dc_component(&dense_category_encoding(labels).unwrap());
    check(
        "scaled DC (1,2,3,2)",
        (dc(&[1, 2, 3, 2]) - 0.05719).abs() <= 1e-5,
    );
    check("scaled DC (1,2)", (dc(&[1, 2]) - 0.05132).abs() <= 1e-5);
    check("scaled DC constant", dc(&[4, 4, 4, 4]) == 0.0);

    for _ in 0..200 {
        let n = rng.random_range(1..50);
        let ranks: Vec<usize> = (0..n).map(|_| rng.random_range(1..40)).collect();
        let m = metric_values(&ranks).unwrap();
        check(
            "HR monotone in k",
            m["HR@5"] <= m["HR@10"] && m["HR@10"] <= m["HR@20"],
        );
        check(
            "NDCG monotone in k",
            m["NDCG@5"] <= m["NDCG@10"] && m["NDCG@10"] <= m["NDCG@20"],
        );
        for k in [5, 10, 20] {
            check(
                "NDCG <= HR",
                ndcg_at_k(&ranks, k).unwrap() <= hit_rate_at_k(&ranks, k).unwrap(),
            );
        }

        let len = rng.random_range(4..60);
        let values: Vec<f64> = (0..len)
            .map(|_| (rng.random_range(0..12) as f64) / 4.0)
            .collect();
        let descending = rng.random_bool(0.5);
        let (labels, _) = quartile_labels(&values, descending).unwrap();
        check(
            "quartile labels cover every record",
            labels.len() == len && labels.iter().all(|q| *q < 4),
        );
        for i in 0..len {
            for j in 0..len {
                let before = if descending {
                    values[i] > values[j]
                } else {
                    values[i] < values[j]
                };
                if before {
                    check("quartiles respect order", labels[i] <= labels[j]);
                }
            }
        }

        let xs: Vec<f64> = (0..rng.random_range(2..8))
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let ys: Vec<f64> = (0..rng.random_range(2..8))
            .map(|_| rng.random_range(0.0..1.0))
            .collect();
        let ab = welch_t_test(&xs, &ys).unwrap();
        let ba = welch_t_test(&ys, &xs).unwrap();
        check(
            "Welch symmetry",
            (ab.t + ba.t).abs() <= 1e-12 && (ab.p - ba.p).abs() <= 1e-12,
        );
        let same = welch_t_test(&xs, &xs).unwrap();
        check(
            "Welch identical samples",
            same.t == 0.0 && (same.p - 1.0).abs() <= 1e-12,
        );
    }

    let secs = start.elapsed().as_secs_f64();
    failures.sort();
    failures.dedup();
    let detail =
        format!("worst round-trip error {worst:.1e} (tol {ROUND_TRIP_TOL:.0e}), {secs:.2} s");
    if failures.is_empty() && secs < TIME_LIMIT_SECS {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(format!("{detail}; failed: {}", failures.join(", ")))
    }
}

fn gradient_acceptance() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for backend in SpectralBackend::ALL {
        let report = gradient_check(&GradientCheckConfig::tiny(backend)).unwrap();
        ok &= report.max_relative_error <= GRADIENT_TOL;
        parts.push(format!("{backend} {:.1e}", report.max_relative_error));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < TIME_LIMIT_SECS;
    verdict(
        ok,
        format!(
            "max relative error {} (tol {GRADIENT_TOL:.0e}), {secs:.2} s",
            parts.join(", ")
        ),
    )
}

fn memorization() -> Outcome {
    let start = Instant::now();
    let (corpus, _) = parse_corpus_str(&synthetic::successor_corpus(10, 20, 8)).unwrap();
    let splits = leave_last_out_split(&corpus, 10, PaddingMode::Zero).unwrap();
    let mut parts = Vec::new();
    let mut ok = true;
    for backend in SpectralBackend::ALL {
        let mc = ModelConfig {
            hidden_size: 32,
            max_len: 10,
            cutoff: 3,
            dropout: 0.1,
            backend,
            ..ModelConfig::default()
        };
        let tc = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 16,
            max_epochs: 50,
            patience: 50,
            seed: 1,
            ..TrainConfig::default()
        };
        let out = train(&splits, corpus.item_count(), &mc, &tc, |_| {}).unwrap();
        let hr1 = hit_rate_at_k(&rank_examples(&out.model, &splits.valid).unwrap(), 1).unwrap();
        ok &= hr1 == 1.0;
        parts.push(format!("{backend} HR@1 {hr1:.2}"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < TIME_LIMIT_SECS;
    verdict(ok, format!("{}, {secs:.1} s", parts.join(", ")))
}

struct Arm {
    hr10: Vec<f64>,
    /// Seed-1 model, kept for the norm-profile check.
    model: Model<f32>,
}

struct LastFm {
    stats_line: String,
    alpha: f64,
    cutoff: usize,
    bsarec: Arm,
    attention_only: Arm,
    reflect: Arm,
    wavelet: Arm,
    zero_splits: Splits,
    reflect_splits: Splits,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn lastfm_config(
    alpha: f64,
    cutoff: usize,
    backend: SpectralBackend,
    padding: PaddingMode,
) -> ModelConfig {
    let cutoff = cutoff.min(max_cutoff(50, backend).unwrap_or(cutoff));
    ModelConfig {
        alpha,
        cutoff,
        backend,
        padding,
        max_len: 50,
        ..ModelConfig::default()
    }
}

fn lastfm_train_config(seed: u64) -> TrainConfig {
    let defaults = TrainConfig::default();
    TrainConfig {
        seed,
        max_epochs: env_number("BSAREC_LASTFM_MAX_EPOCHS").unwrap_or(defaults.max_epochs),
        ..defaults
    }
}

fn train_arm(corpus: &InteractionCorpus, splits: &Splits, mc: &ModelConfig) -> Arm {
    let mut hr10 = Vec::new();
    let mut first = None;
    for seed in SEEDS {
        let tc = lastfm_train_config(seed);
        let out = train(splits, corpus.item_count(), mc, &tc, |_| {}).unwrap();
        assert_ne!(out.record.stop_reason, "diverged", "seed {seed} diverged");
        hr10.push(hit_rate_at_k(&rank_examples(&out.model, &splits.test).unwrap(), 10).unwrap());
        first.get_or_insert(out.model);
    }
    Arm {
        hr10,
        model: first.unwrap(),
    }
}

fn env_number<T: std::str::FromStr>(key: &str) -> Option<T> {
    std::env::var(key).ok().and_then(|v| v.parse().ok())
}

/// Trains every LastFM arm once; shared by criteria 4-7.
fn lastfm() -> Result<&'static LastFm, String> {
    static CELL: OnceLock<Result<LastFm, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let path = std::env::var_os(LASTFM_ENV)
            .ok_or_else(|| format!("LastFM corpus not available (set {LASTFM_ENV})"))?;
        let (corpus, _) = parse_corpus(&path).map_err(|e| e.to_string())?;
        let stats = compute_stats(&corpus);
        let stats_line = format!(
            "{} users, {} items, {} interactions",
            stats.user_count, stats.item_count, stats.interaction_count
        );
        let zero_splits =
            leave_last_out_split(&corpus, 50, PaddingMode::Zero).map_err(|e| e.to_string())?;
        let reflect_splits =
            leave_last_out_split(&corpus, 50, PaddingMode::Reflect).map_err(|e| e.to_string())?;

        let (alpha, cutoff) = match (
            env_number("BSAREC_LASTFM_ALPHA"),
            env_number("BSAREC_LASTFM_C"),
        ) {
            (Some(a), Some(c)) => (a, c),
            _ => {
                let mut best = (f64::NEG_INFINITY, 0.5, 3);
                for alpha in [0.1, 0.3, 0.5, 0.7, 0.9] {
                    for cutoff in [1, 3, 5, 7, 9] {
                        let mc = lastfm_config(
                            alpha,
                            cutoff,
                            SpectralBackend::Fourier,
                            PaddingMode::Zero,
                        );
                        let tc = lastfm_train_config(SEEDS[0]);
                        let out =
                            train(&zero_splits, corpus.item_count(), &mc, &tc, |_| {}).unwrap();
                        let score = out.record.best_valid_ndcg10.unwrap_or(f64::NEG_INFINITY);
                        if score > best.0 {
                            best = (score, alpha, cutoff);
                        }
                    }
                }
                (best.1, best.2)
            }
        };
        let cfg = |alpha, backend, padding| lastfm_config(alpha, cutoff, backend, padding);
        Ok(LastFm {
            stats_line,
            alpha,
            cutoff,
            bsarec: train_arm(
                &corpus,
                &zero_splits,
                &cfg(alpha, SpectralBackend::Fourier, PaddingMode::Zero),
            ),
            attention_only: train_arm(
                &corpus,
                &zero_splits,
                &cfg(0.0, SpectralBackend::Fourier, PaddingMode::Zero),
            ),
            reflect: train_arm(
                &corpus,
                &reflect_splits,
                &cfg(alpha, SpectralBackend::Fourier, PaddingMode::Reflect),
            ),
            wavelet: train_arm(
                &corpus,
                &zero_splits,
                &cfg(alpha, SpectralBackend::Wavelet, PaddingMode::Zero),
            ),
            zero_splits,
            reflect_splits,
        })
    })
    .as_ref()
    .map_err(Clone::clone)
}

fn with_lastfm(f: impl FnOnce(&LastFm) -> Outcome) -> Outcome {
    match lastfm() {
        Ok(data) => f(data),
        Err(reason) => Outcome::Blocked(reason),
    }
}

fn lastfm_reproduction() -> Outcome {
    with_lastfm(|d| {
        let ours = mean(&d.bsarec.hr10);
        let ablation = mean(&d.attention_only.hr10);
        let rel = (ours - REFERENCE_HR10).abs() / REFERENCE_HR10;
        verdict(
            rel <= REFERENCE_BAND && ours > ablation,
            format!(
                "{}; alpha {} c {}: HR@10 {ours:.4} vs reference {REFERENCE_HR10} ({:.1}% off, band {:.0}%), attention-only {ablation:.4}",
                d.stats_line,
                d.alpha,
                d.cutoff,
                100.0 * rel,
                100.0 * REFERENCE_BAND
            ),
        )
    })
}

fn padding_study() -> Outcome {
    with_lastfm(|d| {
        let zero = mean(&d.bsarec.hr10);
        let reflect = mean(&d.reflect.hr10);
        let p = welch_t_test(&d.reflect.hr10, &d.bsarec.hr10)
            .map(|w| w.p)
            .unwrap_or(f64::NAN);
        verdict(
            reflect > zero,
            format!("reflect HR@10 {reflect:.4} vs zero {zero:.4}, Welch p {p:.3}"),
        )
    })
}

fn backend_study() -> Outcome {
    with_lastfm(|d| {
        let fourier = mean(&d.bsarec.hr10);
        let wavelet = mean(&d.wavelet.hr10);
        let rel = (fourier - wavelet).abs() / fourier;
        verdict(
            rel <= BACKEND_BAND,
            format!(
                "fourier HR@10 {fourier:.4} vs wavelet {wavelet:.4}, gap {:.1}% (band {:.0}%)",
                100.0 * rel,
                100.0 * BACKEND_BAND
            ),
        )
    })
}

/// Mean pad-region (LFC, HFC) norms over every test window with padding.
fn pad_norms(model: &Model<f32>, splits: &Splits) -> (f64, f64) {
    let (mut l, mut h, mut n) = (0.0, 0.0, 0usize);
    for ex in &splits.test {
        let rows = lfc_hfc_norm_profile(model, ex).unwrap();
        if rows.iter().any(|r| r.is_pad) {
            let (a, b) = pad_region_means(&rows).unwrap();
            l += a;
            h += b;
            n += 1;
        }
    }
    (l / n.max(1) as f64, h / n.max(1) as f64)
}

fn norm_profile_check() -> Outcome {
    with_lastfm(|d| {
        let (zl, zh) = pad_norms(&d.bsarec.model, &d.zero_splits);
        let (rl, rh) = pad_norms(&d.reflect.model, &d.reflect_splits);
        let ok = zl > zh && rl / rh < zl / zh;
        verdict(
            ok,
            format!("pad-region LFC/HFC: zero {zl:.3}/{zh:.3}, reflect {rl:.3}/{rh:.3}"),
        )
    })
}

fn main() {
    // `cargo test -- <filter>` passes arguments through; the suite always runs in full.
    let criteria: [Criterion; 7] = [
        ("property suite", property_suite),
        ("gradient check, all backends", gradient_acceptance),
        ("memorization oracle", memorization),
        ("LastFM reproduction", lastfm_reproduction),
        ("LastFM padding study", padding_study),
        ("LastFM backend study", backend_study),
        ("LastFM pad-region norm profile", norm_profile_check),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Blocked(d) => ("BLOCKED", d),
        };
        println!("criterion {}: {tag:<7} {name}: {detail}", i + 1);
    }
    println!(
        "criterion 8: NOT RUN  multi-dataset full-scale reproduction: outside desk scale, stood in for by 1-7; \
         the sequence-length sweep runs through `bsarec sweep`"
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
