//! WebAssembly bindings for the static page in `www/`.
//!
//! Each export is a thin wrapper over a plain function so the logic can be
//! tested natively.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use sprout_core::features::extract_scale_features;
use sprout_core::preprocess::{Biquad, ChainConfig};
use sprout_core::regress::mean_and_ci;
use sprout_core::wavelet::{plan_scales, CwtEngine};
use wasm_bindgen::prelude::*;

/// Longest signal the page may transform.
pub const MAX_SAMPLES: usize = 1 << 16;

/// Scalogram of `samples` as `k` rows of `columns` values; each column is the
/// mean magnitude over a run of consecutive samples. The first `k` entries
/// are the analysis frequencies in Hz (descending).
pub fn scalogram_rows(samples: &[f64], sample_rate_hz: f64, k: usize, columns: usize) -> Result<Vec<f64>, String> {
    if samples.len() > MAX_SAMPLES {
        return Err(format!("at most {MAX_SAMPLES} samples, got {}", samples.len()));
    }
    if columns == 0 || columns > samples.len() {
        return Err(format!("columns must lie in 1..={}", samples.len()));
    }
    let plan = plan_scales(sample_rate_hz, samples.len(), k).map_err(|e| e.to_string())?;
    let mags = CwtEngine::new(plan.clone())
        .magnitudes(samples)
        .map_err(|e| e.to_string())?;
    let n = samples.len();
    let mut out = plan.frequencies_hz.clone();
    for row in &mags {
        out.extend((0..columns).map(|c| {
            let run = &row[c * n / columns..(c + 1) * n / columns];
            run.iter().sum::<f64>() / run.len() as f64
        }));
    }
    Ok(out)
}

/// Magnitude response of the notch and low-pass chain at `points` frequencies
/// spread linearly over `(0, rate/2)`, as `[f0, g0, f1, g1, ...]`.
pub fn chain_response(
    sample_rate_hz: f64,
    notch_hz: &[f64],
    notch_q: f64,
    lowpass_hz: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    let nyquist = sample_rate_hz / 2.0;
    if !(sample_rate_hz > 0.0) || points < 2 {
        return Err("need a positive rate and at least 2 points".into());
    }
    for &f in notch_hz.iter().chain([&lowpass_hz]) {
        if !(f > 0.0 && f < nyquist) {
            return Err(format!("{f} Hz is outside (0, {nyquist}) Hz"));
        }
    }
    let mut sections: Vec<Biquad> = notch_hz
        .iter()
        .map(|&f| Biquad::notch(sample_rate_hz, f, notch_q))
        .collect();
    sections.push(Biquad::lowpass(sample_rate_hz, lowpass_hz, ChainConfig::default().lowpass_q));
    Ok((1..=points)
        .flat_map(|i| {
            let f = nyquist * i as f64 / (points + 1) as f64;
            let g: f64 = sections.iter().map(|s| s.gain_at(f, sample_rate_hz)).product();
            [f, g]
        })
        .collect())
}

/// `[mean, ci_halfwidth, retained]` for member predictions, where
/// `retained` is 1 when the full interval width is at most `uq_th`.
pub fn interval(predictions: &[f64], uq_th: f64) -> Result<Vec<f64>, String> {
    if predictions.len() < 2 {
        return Err("need at least 2 member predictions".into());
    }
    if predictions.iter().any(|p| !p.is_finite()) {
        return Err("predictions must be finite".into());
    }
    let (mean, hw) = mean_and_ci(predictions);
    Ok(vec![mean, hw, f64::from(u8::from(2.0 * hw <= uq_th))])
}

/// The 14 descriptors of one coefficient row.
pub fn describe_row(values: &[f64]) -> Result<Vec<f64>, String> {
    if values.len() < 2 {
        return Err("need at least 2 values".into());
    }
    Ok(extract_scale_features(values).to_array().to_vec())
}

#[wasm_bindgen]
pub fn scalogram(samples: &[f64], sample_rate_hz: f64, k: usize, columns: usize) -> Result<Vec<f64>, JsError> {
    scalogram_rows(samples, sample_rate_hz, k, columns).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn filter_response(
    sample_rate_hz: f64,
    notch_hz: &[f64],
    notch_q: f64,
    lowpass_hz: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    chain_response(sample_rate_hz, notch_hz, notch_q, lowpass_hz, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn ensemble_interval(predictions: &[f64], uq_th: f64) -> Result<Vec<f64>, JsError> {
    interval(predictions, uq_th).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn row_features(values: &[f64]) -> Result<Vec<f64>, JsError> {
    describe_row(values).map_err(|e| JsError::new(&e))
}
