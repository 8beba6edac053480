//! From per-window predictions to one estimated event day per subject.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::regress::{ensemble_predict, Ensemble, TrainedModel};

/// A single model or an ensemble with its retention threshold.
#[derive(Debug, Clone, Copy)]
pub enum Predictor<'a> {
    Single(&'a TrainedModel),
    Ensemble(&'a Ensemble),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowEstimate {
    pub subject_id: String,
    pub window_index: usize,
    pub day_offset: i64,
    /// Predicted days until the event.
    pub y_hat: f64,
    /// Estimated event day: `day_offset + y_hat`.
    pub d_hat: f64,
    pub ci_halfwidth: Option<f64>,
    pub retained: bool,
}

impl WindowEstimate {
    pub fn new(fv: &FeatureVector, y_hat: f64, ci_halfwidth: Option<f64>, uq_th: Option<f64>) -> Self {
        let retained = match (ci_halfwidth, uq_th) {
            (Some(hw), Some(th)) => 2.0 * hw <= th,
            _ => true,
        };
        Self {
            subject_id: fv.subject_id.clone(),
            window_index: fv.window_index,
            day_offset: fv.day_offset,
            y_hat,
            d_hat: fv.day_offset as f64 + y_hat,
            ci_halfwidth,
            retained,
        }
    }

    /// Re-apply the retention rule for another threshold.
    pub fn with_threshold(&self, uq_th: f64) -> Self {
        Self {
            retained: self.ci_halfwidth.is_none_or(|hw| 2.0 * hw <= uq_th),
            ..self.clone()
        }
    }
}

/// One estimate per window. An ensemble needs `uq_th` (maximum full width of
/// the 95 % interval); a single model retains every window.
pub fn window_estimates(
    predictor: Predictor<'_>,
    features: &[FeatureVector],
    uq_th: Option<f64>,
) -> Result<Vec<WindowEstimate>> {
    match predictor {
        Predictor::Single(model) => features
            .iter()
            .map(|fv| Ok(WindowEstimate::new(fv, model.predict(&fv.values)?, None, None)))
            .collect(),
        Predictor::Ensemble(ens) => {
            let th = uq_th.ok_or_else(|| Error::Config("ensemble prediction requires uq_th".into()))?;
            if th.is_nan() || th < 0.0 {
                return Err(Error::Config(format!("uq_th must be non-negative, got {th}")));
            }
            features
                .iter()
                .map(|fv| {
                    let (mean, hw) = ensemble_predict(ens, &fv.values)?;
                    Ok(WindowEstimate::new(fv, mean, Some(hw), Some(th)))
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectEstimate {
    pub subject_id: String,
    /// Only windows with `day_offset < observation_day` are used.
    pub observation_day: i64,
    pub d_hat: f64,
    pub n_windows_used: usize,
    /// No window before the observation day was retained; the one with the
    /// narrowest interval stood in.
    pub fallback_used: bool,
}

/// Mean of retained `d_hat` over windows observed strictly before
/// `observation_day`.
pub fn aggregate(estimates: &[WindowEstimate], observation_day: i64) -> Result<SubjectEstimate> {
    let subject_id = estimates
        .first()
        .map(|e| e.subject_id.clone())
        .unwrap_or_default();
    if let Some(other) = estimates.iter().find(|e| e.subject_id != subject_id) {
        return Err(Error::Config(format!(
            "aggregate expects one subject, got {subject_id} and {}",
            other.subject_id
        )));
    }
    let observed: Vec<&WindowEstimate> = estimates
        .iter()
        .filter(|e| e.day_offset < observation_day)
        .collect();
    if observed.is_empty() {
        return Err(Error::NothingObserved {
            subject_id,
            observation_day,
        });
    }

    let retained: Vec<f64> = observed.iter().filter(|e| e.retained).map(|e| e.d_hat).collect();
    if !retained.is_empty() {
        let (lo, hi) = retained
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let mean = retained.iter().sum::<f64>() / retained.len() as f64;
        return Ok(SubjectEstimate {
            subject_id,
            observation_day,
            d_hat: mean.clamp(lo, hi),
            n_windows_used: retained.len(),
            fallback_used: false,
        });
    }

    // First window with the narrowest interval.
    let best = observed
        .iter()
        .min_by(|a, b| {
            let w = |e: &WindowEstimate| e.ci_halfwidth.unwrap_or(f64::INFINITY);
            w(a).total_cmp(&w(b))
        })
        .expect("observed is non-empty");
    Ok(SubjectEstimate {
        subject_id,
        observation_day,
        d_hat: best.d_hat,
        n_windows_used: 1,
        fallback_used: true,
    })
}

/// Trailing mean over the last `min(n, available)` values.
pub fn rolling_mean(series: &[f64], n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..series.len())
        .map(|i| {
            let window = &series[(i + 1).saturating_sub(n)..=i];
            // Offsetting by the first value keeps constant input exact.
            let first = window[0];
            first + window.iter().map(|v| v - first).sum::<f64>() / window.len() as f64
        })
        .collect()
}
