//! Content-addressed cache of parsed corpora and splits.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bsarec_core::data::{
    compute_stats, leave_last_out_split, load_category_map, parse_corpus, CategoryMapReport,
    DatasetStats, InteractionCorpus, Splits,
};
use bsarec_core::experiment::ExperimentConfig;
use bsarec_core::signal::PaddingMode;
use bsarec_core::Error;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::output::{read_json, write_json};

pub const CACHE_ENV: &str = "BSAREC_CACHE_DIR";
const CACHE_VERSION: &str = "bsarec-prepare-1";

pub fn cache_root(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| cfg.output_dir.join("cache"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub key: String,
    pub dataset: PathBuf,
    pub category_map: Option<PathBuf>,
    pub max_len: usize,
    pub padding: PaddingMode,
    pub dropped_short_users: usize,
    pub category_report: Option<CategoryMapReport>,
}

pub struct Prepared {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub corpus: InteractionCorpus,
    pub splits: Splits,
    pub stats: DatasetStats,
    pub reused: bool,
}

fn read_input(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        Error::Io {
            path: path.to_path_buf(),
            source: e,
        }
        .into()
    })
}

/// Hash of everything that determines the prepared splits.
pub fn cache_key(
    corpus: &[u8],
    category_map: Option<&[u8]>,
    max_len: usize,
    padding: PaddingMode,
) -> String {
    let mut h = Sha256::new();
    h.update(CACHE_VERSION.as_bytes());
    h.update((corpus.len() as u64).to_le_bytes());
    h.update(corpus);
    match category_map {
        Some(m) => {
            h.update([1]);
            h.update((m.len() as u64).to_le_bytes());
            h.update(m);
        }
        None => h.update([0]),
    }
    h.update((max_len as u64).to_le_bytes());
    h.update(padding.as_str().as_bytes());
    hex::encode(h.finalize())
}

/// Loads the prepared corpus for `max_len`/`padding`, building it on a miss.
pub fn prepare(cfg: &ExperimentConfig, max_len: usize, padding: PaddingMode) -> Result<Prepared> {
    let corpus_bytes = read_input(&cfg.dataset)?;
    let map_bytes = cfg.category_map.as_deref().map(read_input).transpose()?;
    let key = cache_key(&corpus_bytes, map_bytes.as_deref(), max_len, padding);
    let dir = cache_root(cfg).join(&key[..24]);

    if dir.join("manifest.json").exists() {
        let manifest: Manifest = read_json(&dir.join("manifest.json"))?;
        if manifest.key == key {
            let mut corpus: InteractionCorpus = read_json(&dir.join("corpus.json"))?;
            corpus.items.reindex();
            log::info!("reusing prepared data in {}", dir.display());
            return Ok(Prepared {
                splits: read_json(&dir.join("splits.json"))?,
                stats: read_json(&dir.join("stats.json"))?,
                dir,
                manifest,
                corpus,
                reused: true,
            });
        }
    }

    let (mut corpus, report) = parse_corpus(&cfg.dataset)?;
    let category_report = match &cfg.category_map {
        Some(p) => Some(load_category_map(p, &mut corpus)?),
        None => None,
    };
    let splits = leave_last_out_split(&corpus, max_len, padding)?;
    let stats = compute_stats(&corpus);
    let manifest = Manifest {
        key,
        dataset: cfg.dataset.clone(),
        category_map: cfg.category_map.clone(),
        max_len,
        padding,
        dropped_short_users: report.dropped_short.len(),
        category_report,
    };
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("corpus.json"), &corpus)?;
    write_json(&dir.join("splits.json"), &splits)?;
    write_json(&dir.join("stats.json"), &stats)?;
    // written last: its presence marks a complete entry
    write_json(&dir.join("manifest.json"), &manifest)?;
    log::info!(
        "prepared {} users into {}",
        corpus.users.len(),
        dir.display()
    );
    Ok(Prepared {
        dir,
        manifest,
        corpus,
        splits,
        stats,
        reused: false,
    })
}
