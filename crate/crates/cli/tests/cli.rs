use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bsarec_core::data::synthetic::successor_corpus;
use bsarec_core::data::{compute_stats, parse_corpus_str, DatasetStats};
use serde_json::Value;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) -> PathBuf {
        let p = self.path(name);
        fs::write(&p, text).unwrap();
        p
    }

    /// Runs the binary with the cache kept inside the workspace.
    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_bsarec"))
            .args(args)
            .env("BSAREC_CACHE_DIR", self.path("cache"))
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn read_csv(p: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(p).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|x| x.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

/// Small enough to train in a couple of seconds; memorizes the successor corpus.
fn toy_config(ws: &Workspace, seeds: &[u64]) -> PathBuf {
    let data = ws.write("toy.txt", &successor_corpus(10, 20, 8));
    let cfg = serde_json::json!({
        "dataset": data,
        "seeds": seeds,
        "output_dir": ws.path("out"),
        "model": {"hidden_size": 16, "num_layers": 2, "num_heads": 1, "max_len": 10, "cutoff": 3,
                  "alpha": 0.5, "dropout": 0.1},
        "train": {"learning_rate": 0.01, "batch_size": 16, "max_epochs": 50, "patience": 10}
    });
    ws.write("config.json", &cfg.to_string())
}

#[test]
fn usage_and_data_errors_map_to_exit_codes() {
    let ws = Workspace::new();
    assert_eq!(code(&ws.run(&["--help"])), 0);
    assert_eq!(code(&ws.run(&["--version"])), 0);
    assert_eq!(code(&ws.run(&["frobnicate"])), 1);
    assert_eq!(
        code(&ws.run(&["prepare", "--padding", "sideways", "--data", "x"])),
        1
    );
    // no dataset configured
    assert_eq!(code(&ws.run(&["prepare"])), 1);
    assert_eq!(
        code(&ws.run(&["prepare", "--set", "model.nonsense=1", "--data", "x"])),
        1
    );
    let missing = ws.path("missing.txt");
    assert_eq!(
        code(&ws.run(&["prepare", "--data", missing.to_str().unwrap()])),
        2
    );
    let bad = ws.write("bad.txt", "u1 a b c\nu1 d e f\n");
    let o = ws.run(&["prepare", "--data", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    // the error names the file and line
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.txt:2"), "{err}");
}

#[test]
fn prepare_is_cached_by_content() {
    let ws = Workspace::new();
    let text = "u1 a b c d\nu2 b c d e f\nu3 a a\n";
    let data = ws.write("c.txt", text);
    let d = data.to_str().unwrap();
    let first = ws.run(&["prepare", "--data", d, "--max-len", "4"]);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    assert!(stdout(&first).starts_with("prepared "));
    let second = ws.run(&["prepare", "--data", d, "--max-len", "4"]);
    assert!(stdout(&second).starts_with("reused "));
    let dir =
        |o: &Output| PathBuf::from(stdout(o).lines().next().unwrap().split_once(' ').unwrap().1);
    assert_eq!(dir(&first), dir(&second));

    let stats: DatasetStats =
        serde_json::from_value(read_json(&dir(&first).join("stats.json"))).unwrap();
    assert_eq!(stats, compute_stats(&parse_corpus_str(text).unwrap().0));
    assert_eq!(stats.user_count, 2);
    // the input is left untouched
    assert_eq!(fs::read_to_string(&data).unwrap(), text);

    let other_len = ws.run(&["prepare", "--data", d, "--max-len", "5"]);
    assert_ne!(dir(&other_len), dir(&first));
    ws.write("c.txt", "u1 a b c d\nu2 b c d e g\n");
    let edited = ws.run(&["prepare", "--data", d, "--max-len", "4"]);
    assert!(stdout(&edited).starts_with("prepared "));
    assert_ne!(dir(&edited), dir(&first));
}

#[test]
fn analyze_matches_direct_formula() {
    let ws = Workspace::new();
    let data = ws.write("c.txt", "u1 a b c d\nu2 a a a\nu3 a b a b e\n");
    let map = ws.write("map.txt", "a x\nb y\nc z\nd y\ne z\n");
    let out = ws.path("out");
    let o = ws.run(&[
        "analyze",
        "--data",
        data.to_str().unwrap(),
        "--category-map",
        map.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let summary = read_json(&out.join("analysis/scaled_dc_summary.json"));
    // x y z y -> 1 - 4/sqrt(18); x x x -> 0; x y x y z -> 1 - 9/sqrt(95)
    assert!((summary["mean"].as_f64().unwrap() - 0.04460348051376591).abs() < 1e-12);
    assert!((summary["max"].as_f64().unwrap() - 0.0766194831233612).abs() < 1e-12);
    assert_eq!(summary["min"].as_f64().unwrap(), 0.0);
    assert_eq!(summary["uses_category_map"], Value::Bool(true));

    let (header, rows) = read_csv(&out.join("analysis/occurrence_distribution.csv"));
    assert_eq!(header, ["occurrence", "users", "proportion"]);
    assert_eq!(rows.len(), 26);
    let users: Vec<usize> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(&users[..3], &[1, 1, 1]);
    assert_eq!(users.iter().sum::<usize>(), 3);
}

#[test]
fn train_eval_and_resume() {
    let ws = Workspace::new();
    let cfg = toy_config(&ws, &[1, 2]);
    let c = cfg.to_str().unwrap();
    let out = ws.path("out");

    let o = ws.run(&["train", "--config", c]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for seed in [1, 2] {
        let d = out.join(format!("seed-{seed}"));
        assert!(d.join("checkpoint.json").exists());
        let rec = read_json(&d.join("record.json"));
        assert_eq!(rec["seed"], seed);
        let lines = fs::read_to_string(d.join("run.jsonl"))
            .unwrap()
            .lines()
            .count();
        assert_eq!(lines, rec["epochs"].as_array().unwrap().len());
    }
    let ckpt = fs::read(out.join("seed-1/checkpoint.json")).unwrap();
    let again = ws.run(&["train", "--config", c]);
    assert_eq!(code(&again), 0);
    assert_eq!(
        fs::read(out.join("seed-1/checkpoint.json")).unwrap(),
        ckpt,
        "completed seed retrained"
    );

    // a validation target is memorized: every rank is 1
    let o = ws.run(&["eval", "--config", c, "--split", "valid"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("eval-valid/seed-1/ranks.csv"));
    assert_eq!(header[..2], ["user_id", "rank"]);
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().all(|r| r[1] == "1"), "{rows:?}");

    let o = ws.run(&["eval", "--config", c]);
    assert_eq!(code(&o), 0);
    let report = read_json(&out.join("eval-test/metrics.json"));
    assert_eq!(report["seeds"], serde_json::json!([1, 2]));
    let m = &report["metrics"];
    for k in ["HR@5", "HR@10", "HR@20", "NDCG@5", "NDCG@10", "NDCG@20"] {
        assert!(m[k]["mean"].is_f64(), "missing {k}");
    }
    let v = |k: &str| m[k]["mean"].as_f64().unwrap();
    assert!(v("HR@5") <= v("HR@10") && v("HR@10") <= v("HR@20"));
    assert!(v("NDCG@10") <= v("HR@10"));
    let (gh, groups) = read_csv(&out.join("eval-test/groups_scaled_dc.csv"));
    assert_eq!(gh[..3], ["quartile", "users", "HR@5_mean"]);
    assert_eq!(groups.len(), 4);
    let (ph, profile) = read_csv(&out.join("eval-test/seed-1/norm_profile.csv"));
    assert_eq!(
        ph,
        ["position", "pad_fraction", "lfc_norm_mean", "hfc_norm_mean"]
    );
    assert_eq!(profile.len(), 10);

    // same inputs and seeds give identical outputs
    let before = fs::read(out.join("eval-test/metrics.json")).unwrap();
    assert_eq!(code(&ws.run(&["eval", "--config", c])), 0);
    assert_eq!(
        fs::read(out.join("eval-test/metrics.json")).unwrap(),
        before
    );

    // significance against a single-seed baseline is unavailable
    let base = ws.path("base");
    let b = base.to_str().unwrap();
    assert_eq!(
        code(&ws.run(&["train", "--config", c, "--seed", "3", "--out", b, "--alpha", "0"])),
        0
    );
    assert_eq!(
        code(&ws.run(&["eval", "--config", c, "--seed", "3", "--out", b])),
        0
    );
    assert_eq!(code(&ws.run(&["eval", "--config", c, "--baseline", b])), 4);

    assert_eq!(
        code(&ws.run(&["train", "--config", c, "--seed", "4", "--out", b, "--alpha", "0"])),
        0
    );
    let o = ws.run(&["eval", "--config", c, "--out", b, "--set", "seeds=[3,4]"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(code(&ws.run(&["eval", "--config", c, "--baseline", b])), 0);
    let (sh, sig) = read_csv(&out.join("eval-test/significance.csv"));
    assert_eq!(
        sh,
        [
            "metric",
            "mean",
            "baseline_mean",
            "t",
            "degrees_of_freedom",
            "p"
        ]
    );
    assert_eq!(sig.len(), 6);
}

#[test]
fn divergence_exits_3() {
    let ws = Workspace::new();
    let cfg = toy_config(&ws, &[1]);
    let o = ws.run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "lr=1e30",
        "--set",
        "train.max_epochs=3",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let d = ws.path("out/seed-1");
    assert!(d.join("record.diverged.json").exists());
    assert!(!d.join("record.json").exists());
}

#[test]
fn sweep_has_one_row_per_value_and_seed() {
    let ws = Workspace::new();
    let cfg = toy_config(&ws, &[1, 2]);
    let c = cfg.to_str().unwrap();
    let o = ws.run(&[
        "sweep",
        "--config",
        c,
        "--axis",
        "padding",
        "--values",
        "zero,reflect",
        "--set",
        "train.max_epochs=2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let root = ws.path("out/sweep-model.padding");
    let (header, rows) = read_csv(&root.join("sweep.csv"));
    assert_eq!(header[..3], ["axis", "value", "seed"]);
    let keys: Vec<(String, String)> = rows.iter().map(|r| (r[1].clone(), r[2].clone())).collect();
    assert_eq!(
        keys,
        [
            ("zero", "1"),
            ("zero", "2"),
            ("reflect", "1"),
            ("reflect", "2")
        ]
        .map(|(a, b)| (a.to_string(), b.to_string()))
    );
    let (_, summary) = read_csv(&root.join("summary.csv"));
    assert_eq!(summary.len(), 2);

    // an axis of length one matches a plain train + eval
    let o = ws.run(&[
        "sweep",
        "--config",
        c,
        "--axis",
        "alpha",
        "--values",
        "0.5",
        "--set",
        "train.max_epochs=2",
    ]);
    assert_eq!(code(&o), 0);
    let plain = ws.path("plain");
    let p = plain.to_str().unwrap();
    for cmd in ["train", "eval"] {
        assert_eq!(
            code(&ws.run(&[
                cmd,
                "--config",
                c,
                "--out",
                p,
                "--set",
                "train.max_epochs=2"
            ])),
            0
        );
    }
    assert_eq!(
        fs::read(ws.path("out/sweep-model.alpha/0.5/eval-test/metrics.json")).unwrap(),
        fs::read(plain.join("eval-test/metrics.json")).unwrap()
    );
}
