//! Browser bindings for the signal operations behind the model: band split
//! and rescaling, history padding, and the scaled DC statistic.

use bsarec_core::signal::{
    self, dense_category_encoding, max_cutoff, scaled_dc_component, PaddingMode, RealSequence,
    SpectralBackend,
};
use wasm_bindgen::prelude::*;

fn backend(name: &str) -> bsarec_core::Result<SpectralBackend> {
    name.parse()
}

/// `[LFC..., HFC...]` of `values`.
pub fn split(values: &[f64], c: usize, backend_name: &str) -> bsarec_core::Result<Vec<f64>> {
    let x = RealSequence::new(values.to_vec())?;
    let (low, high) = signal::band_split(&x, c, backend(backend_name)?)?;
    Ok(low
        .as_slice()
        .iter()
        .chain(high.as_slice())
        .copied()
        .collect())
}

pub fn rescaled(
    values: &[f64],
    c: usize,
    beta: f64,
    backend_name: &str,
) -> bsarec_core::Result<Vec<f64>> {
    let x = RealSequence::new(values.to_vec())?;
    Ok(signal::rescale(&x, c, beta, backend(backend_name)?)?.into_vec())
}

/// The residual backend accepts any cutoff; the slider stops at the length.
pub fn largest_cutoff(len: usize, backend_name: &str) -> bsarec_core::Result<usize> {
    Ok(max_cutoff(len, backend(backend_name)?).unwrap_or(len))
}

pub fn padded(items: &[u32], len: usize, mode: &str) -> bsarec_core::Result<Vec<u32>> {
    let mode: PaddingMode = mode.parse()?;
    Ok(signal::pad_history(items, len, mode)?.items)
}

/// Scaled DC of whitespace-separated category labels.
pub fn scaled_dc_of(labels: &str) -> bsarec_core::Result<f64> {
    let labels: Vec<&str> = labels.split_whitespace().collect();
    Ok(scaled_dc_component(&dense_category_encoding(&labels)?))
}

fn js(e: bsarec_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = bandSplit)]
pub fn band_split(values: &[f64], c: usize, backend: &str) -> Result<Vec<f64>, JsError> {
    split(values, c, backend).map_err(js)
}

#[wasm_bindgen]
pub fn rescale(values: &[f64], c: usize, beta: f64, backend: &str) -> Result<Vec<f64>, JsError> {
    rescaled(values, c, beta, backend).map_err(js)
}

#[wasm_bindgen(js_name = maxCutoff)]
pub fn max_cutoff_js(len: usize, backend: &str) -> Result<usize, JsError> {
    largest_cutoff(len, backend).map_err(js)
}

#[wasm_bindgen(js_name = padHistory)]
pub fn pad_history(items: &[u32], len: usize, mode: &str) -> Result<Vec<u32>, JsError> {
    padded(items, len, mode).map_err(js)
}

#[wasm_bindgen(js_name = scaledDc)]
pub fn scaled_dc(labels: &str) -> Result<f64, JsError> {
    scaled_dc_of(labels).map_err(js)
}
