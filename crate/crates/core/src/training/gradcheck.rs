use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckConfig {
    pub model: ModelConfig,
    pub num_items: usize,
    pub seed: u64,
    /// Central-difference step.
    pub step: f64,
    /// Denominator floor of the relative error, so that gradients that are
    /// zero up to rounding do not inflate it.
    pub floor: f64,
}

impl GradientCheckConfig {
    /// Two layers, two heads, `max_len = 8`, `hidden = 8`, twelve items,
    /// no dropout.
    pub fn tiny(backend: crate::signal::SpectralBackend) -> Self {
        GradientCheckConfig {
            model: ModelConfig {
                hidden_size: 8,
                num_layers: 2,
                num_heads: 2,
                max_len: 8,
                cutoff: 3,
                backend,
                dropout: 0.0,
                ffn_multiplier: 2,
                init_std: 0.5,
                ..ModelConfig::default()
            },
            num_items: 12,
            seed: 3,
            step: 1e-5,
            floor: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupError {
    pub name: String,
    pub max_relative_error: f64,
    pub max_abs_gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientReport {
    pub groups: Vec<GroupError>,
    pub max_relative_error: f64,
    pub parameters_checked: usize,
    pub elapsed_secs: f64,
}

impl GradientReport {
    pub fn worst_group(&self) -> Option<&GroupError> {
        self.groups
            .iter()
            .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
    }
}

/// Compares the analytic gradient of the mean next-item loss against
/// central finite differences for every parameter, in `f64`.
pub fn gradient_check(config: &GradientCheckConfig) -> Result<GradientReport> {
    let m = &config.model;
    if m.max_len > 8 || m.hidden_size > 8 || config.num_items > 12 {
        return Err(Error::Parameter(
            "gradient check expects max_len <= 8, hidden <= 8, items <= 12".into(),
        ));
    }
    let start = Instant::now();
    let mut model = Model::<f64>::new(m.clone(), config.num_items, config.seed)?;
    let len = m.max_len;
    let n = config.num_items as u32;

    // two leading pads, then a deterministic walk over the vocabulary
    let history: Vec<u32> = (0..len as u32 - 1).map(|i| (i * 5 + 3) % n + 1).collect();
    let mut window = vec![0u32; len];
    let mut targets = vec![0u32; len];
    let mut mask = vec![false; len];
    for t in 2..len {
        window[t] = history[t - 2];
        targets[t] = history[t - 1];
        mask[t] = true;
    }

    let mut grads = model.params().zeros_like();
    let count = mask.iter().filter(|&&b| b).count() as f64;
    model.loss_and_grad::<rand_chacha::ChaCha8Rng>(
        &window,
        &targets,
        &mask,
        1.0 / count,
        None,
        &mut grads,
    )?;

    let layout = model.params().layout().clone();
    let mut groups = Vec::with_capacity(layout.groups.len());
    let mut checked = 0;
    for g in &layout.groups {
        let mut worst: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in g.range.clone() {
            let orig = model.params().as_slice()[i];
            model.params_mut().as_mut_slice()[i] = orig + config.step;
            let up = model.mean_loss(&window, &targets, &mask)?;
            model.params_mut().as_mut_slice()[i] = orig - config.step;
            let down = model.mean_loss(&window, &targets, &mask)?;
            model.params_mut().as_mut_slice()[i] = orig;
            let numeric = (up - down) / (2.0 * config.step);
            let analytic = grads.as_slice()[i];
            let denom = analytic.abs().max(numeric.abs()).max(config.floor);
            worst = worst.max((analytic - numeric).abs() / denom);
            max_abs = max_abs.max(analytic.abs());
            checked += 1;
        }
        groups.push(GroupError {
            name: g.name.clone(),
            max_relative_error: worst,
            max_abs_gradient: max_abs,
        });
    }
    let max_relative_error = groups
        .iter()
        .map(|g| g.max_relative_error)
        .fold(0.0, f64::max);
    Ok(GradientReport {
        groups,
        max_relative_error,
        parameters_checked: checked,
        elapsed_secs: start.elapsed().as_secs_f64(),
    })
}
