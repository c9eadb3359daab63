//! Tied-embedding scoring and the next-item cross-entropy.

use rand::Rng;

use super::params::ParameterSet;
use super::tensor::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc, Real};
use super::Model;
use crate::error::{Error, Result};

/// Mean cross-entropy over the masked rows of `logits` (`rows x num_cols`;
/// column 0 is the pad and never competes).
pub fn sequence_loss<T: Real>(
    logits: &[T],
    num_cols: usize,
    targets: &[u32],
    mask: &[bool],
) -> Result<T> {
    let (sum, count) = summed_loss(logits, num_cols, targets, mask)?;
    if count == 0 {
        return Err(Error::InvalidInput(
            "no supervised position in the window".into(),
        ));
    }
    Ok(sum / T::of(count as f64))
}

/// Returns `(summed loss, supervised count)`.
pub(crate) fn summed_loss<T: Real>(
    logits: &[T],
    num_cols: usize,
    targets: &[u32],
    mask: &[bool],
) -> Result<(T, usize)> {
    if num_cols < 2 || logits.len() != targets.len() * num_cols || mask.len() != targets.len() {
        return Err(Error::Shape(format!(
            "logits of {} values do not match {} targets over {num_cols} columns",
            logits.len(),
            targets.len()
        )));
    }
    let mut total = T::zero();
    let mut count = 0;
    for (r, (&t, _)) in targets
        .iter()
        .zip(mask)
        .enumerate()
        .filter(|(_, (_, &m))| m)
    {
        if t == 0 || t as usize >= num_cols {
            return Err(Error::InvalidInput(format!(
                "target id {t} outside 1..{num_cols}"
            )));
        }
        let row = &logits[r * num_cols + 1..(r + 1) * num_cols];
        total += log_sum_exp(row) - logits[r * num_cols + t as usize];
        count += 1;
    }
    Ok((total, count))
}

fn log_sum_exp<T: Real>(row: &[T]) -> T {
    let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let sum: T = row.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln()
}

impl<T: Real> Model<T> {
    fn item_table(&self) -> &[T] {
        let lay = self.params.layout();
        self.params.get(&lay.embed.items)
    }

    /// Scores every item for each row of `states` (`rows x hidden`).
    /// Output is `rows x (num_items + 1)` with the pad column at `-inf`.
    pub fn score_items(&self, states: &[T]) -> Vec<T> {
        let h = self.config.hidden_size;
        let cols = self.num_items() + 1;
        let rows = states.len() / h;
        let mut out = vec![T::zero(); rows * cols];
        matmul_a_bt_acc(states, self.item_table(), rows, h, cols, &mut out);
        for r in 0..rows {
            out[r * cols] = T::neg_infinity();
        }
        out
    }

    /// Eval-mode scores for the item following the last window position.
    pub fn score_next(&self, window: &[u32]) -> Result<Vec<T>> {
        let cache = self.forward::<rand_chacha::ChaCha8Rng>(window, None)?;
        let h = self.config.hidden_size;
        let states = cache.states();
        Ok(self.score_items(&states[states.len() - h..]))
    }

    /// Eval-mode mean cross-entropy over the masked positions of one window.
    pub fn mean_loss(&self, window: &[u32], targets: &[u32], mask: &[bool]) -> Result<T> {
        let cache = self.forward::<rand_chacha::ChaCha8Rng>(window, None)?;
        let logits = self.score_items(cache.states());
        sequence_loss(&logits, self.num_items() + 1, targets, mask)
    }

    /// Forward, loss and backward for one window. Gradients of
    /// `scale * summed loss` are accumulated into `grads`; returns the
    /// unscaled sum and the supervised count.
    pub fn loss_and_grad<R: Rng>(
        &self,
        window: &[u32],
        targets: &[u32],
        mask: &[bool],
        scale: T,
        rng: Option<&mut R>,
        grads: &mut ParameterSet<T>,
    ) -> Result<(T, usize)> {
        if targets.len() != window.len() || mask.len() != window.len() {
            return Err(Error::Shape(
                "targets and mask must match the window length".into(),
            ));
        }
        let cache = self.forward(window, rng)?;
        let h = self.config.hidden_size;
        let cols = self.num_items() + 1;
        let states = cache.states();

        // only supervised rows reach the output layer
        let rows: Vec<usize> = (0..window.len()).filter(|&t| mask[t]).collect();
        if rows.is_empty() {
            return Ok((T::zero(), 0));
        }
        let mut picked = Vec::with_capacity(rows.len() * h);
        for &t in &rows {
            picked.extend_from_slice(&states[t * h..(t + 1) * h]);
        }
        let picked_targets: Vec<u32> = rows.iter().map(|&t| targets[t]).collect();
        let mut logits = self.score_items(&picked);
        let (sum, count) = summed_loss(&logits, cols, &picked_targets, &vec![true; rows.len()])?;

        // softmax minus one-hot, scaled
        for (r, &t) in picked_targets.iter().enumerate() {
            let row = &mut logits[r * cols..(r + 1) * cols];
            let max = row[1..].iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let mut z = T::zero();
            for v in row[1..].iter_mut() {
                *v = (*v - max).exp();
                z += *v;
            }
            row[0] = T::zero();
            for v in row[1..].iter_mut() {
                *v = *v / z * scale;
            }
            row[t as usize] -= scale;
        }
        let dlogits = logits;

        let items = self.params.layout().embed.items.clone();
        matmul_at_b_acc(
            &dlogits,
            &picked,
            rows.len(),
            cols,
            h,
            grads.get_mut(&items),
        );
        let mut dpicked = vec![T::zero(); rows.len() * h];
        matmul_acc(
            &dlogits,
            self.item_table(),
            rows.len(),
            cols,
            h,
            &mut dpicked,
        );
        let mut dstates = vec![T::zero(); states.len()];
        for (r, &t) in rows.iter().enumerate() {
            dstates[t * h..(t + 1) * h].copy_from_slice(&dpicked[r * h..(r + 1) * h]);
        }
        self.backward(&cache, &dstates, grads);
        Ok((sum, count))
    }
}
