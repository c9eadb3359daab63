use crate::error::{Error, Result};
use crate::model::{ParameterSet, Real};

use super::TrainConfig;

/// First and second moments plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update followed by [`ParameterSet::project`].
/// A non-finite gradient aborts before anything is modified.
pub fn adam_step<T: Real>(
    params: &mut ParameterSet<T>,
    grads: &ParameterSet<T>,
    state: &mut AdamState<T>,
    config: &TrainConfig,
) -> Result<()> {
    let n = params.as_slice().len();
    if grads.as_slice().len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Shape(
            "parameters, gradients and optimizer state differ in size".into(),
        ));
    }
    if let Some(i) = grads.as_slice().iter().position(|g| !g.is_finite()) {
        let group = params
            .layout()
            .groups
            .iter()
            .find(|g| g.range.contains(&i))
            .map_or("?", |g| g.name.as_str());
        return Err(Error::Diverged(format!(
            "non-finite gradient at index {i} ({group}) on step {}",
            state.step + 1
        )));
    }
    state.step += 1;
    let (b1, b2) = (config.adam_beta1, config.adam_beta2);
    let c1 = T::of(1.0 - b1.powi(state.step as i32));
    let c2 = T::of(1.0 - b2.powi(state.step as i32));
    let (b1, b2) = (T::of(b1), T::of(b2));
    let (lr, eps) = (T::of(config.learning_rate), T::of(config.adam_epsilon));
    let p = params.as_mut_slice();
    for (((w, &g), m), v) in p
        .iter_mut()
        .zip(grads.as_slice())
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let mhat = *m / c1;
        let vhat = *v / c2;
        *w -= lr * mhat / (vhat.sqrt() + eps);
    }
    params.project();
    Ok(())
}
