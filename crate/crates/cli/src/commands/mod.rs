//! Subcommands, plus the train and evaluate pipelines they share.

pub mod analyze;
pub mod eval;
pub mod prepare;
pub mod sweep;
pub mod train;

use std::path::{Path, PathBuf};

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}
