use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{Error, Result};

/// A category sequence renumbered by order of first appearance, `1..=m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseCategoryVector {
    values: Vec<u32>,
    unique_count: u32,
}

impl DenseCategoryVector {
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn unique_count(&self) -> u32 {
        self.unique_count
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn dense_category_encoding<L: Eq + Hash>(categories: &[L]) -> Result<DenseCategoryVector> {
    if categories.is_empty() {
        return Err(Error::InvalidInput("category sequence is empty".into()));
    }
    let mut ids: HashMap<&L, u32> = HashMap::new();
    let values = categories
        .iter()
        .map(|label| {
            let next = ids.len() as u32 + 1;
            *ids.entry(label).or_insert(next)
        })
        .collect();
    Ok(DenseCategoryVector {
        values,
        unique_count: ids.len() as u32,
    })
}

/// One minus the cosine similarity between the dense vector and all-ones.
///
/// Zero for a single-category history; grows as the history switches
/// categories more often.
pub fn scaled_dc_component(d: &DenseCategoryVector) -> f64 {
    if d.unique_count <= 1 {
        // all-ones vector; avoid rounding noise in the exact case
        return 0.0;
    }
    let n = d.values.len() as f64;
    let sum: f64 = d.values.iter().map(|&v| v as f64).sum();
    let norm = d
        .values
        .iter()
        .map(|&v| (v as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    let dc = sum / n.sqrt();
    (1.0 - dc / norm).max(0.0)
}
