use bsarec_core::experiment::ExperimentConfig;

use crate::cache;
use crate::failure::Failure;

pub fn run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let p = cache::prepare(cfg, cfg.model.max_len, cfg.model.padding)?;
    let verb = if p.reused { "reused" } else { "prepared" };
    println!("{verb} {}", p.dir.display());
    if p.manifest.dropped_short_users > 0 {
        println!("dropped {} short histories", p.manifest.dropped_short_users);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&p.stats).map_err(anyhow::Error::from)?
    );
    Ok(())
}
