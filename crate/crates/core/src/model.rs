//! The on-disk model file and deployment-time prediction.

use std::path::Path;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::config::{PipelineConfig, Strategy};
use crate::error::{Error, Result};
use crate::estimate::{aggregate, window_estimates, Predictor};
use crate::features::{FeaturePipeline, LabeledExample, LabeledSet};
use crate::ingest::Dataset;
use crate::regress::{fit_ensemble_refs, fit_refs, Ensemble, TrainedModel};

pub const MODEL_FORMAT: &str = "sprout-model/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum ModelKind {
    Single { model: TrainedModel },
    Ensemble { ensemble: Ensemble },
}

/// Self-describing model: the pipeline that produced its features, the
/// feature layout it accepts, and the fitted trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub feature_layout_version: String,
    pub pipeline: PipelineConfig,
    pub model: ModelKind,
}

impl ModelFile {
    pub fn predictor(&self) -> Predictor<'_> {
        match &self.model {
            ModelKind::Single { model } => Predictor::Single(model),
            ModelKind::Ensemble { ensemble } => Predictor::Ensemble(ensemble),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: Self = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::LayoutMismatch(format!(
                "unsupported model format {:?}, expected {MODEL_FORMAT:?}",
                file.format
            )));
        }
        Ok(file)
    }
}

/// Fit the configured strategy on every example of `set`.
pub fn train(set: &LabeledSet, config: &PipelineConfig) -> Result<ModelFile> {
    config.require_uq_th()?;
    let examples: Vec<&LabeledExample> = set.examples().collect();
    let spec = &config.regressor;
    let layout = set.layout_version.clone();
    let model = match config.strategy.kind {
        Strategy::Single => ModelKind::Single {
            model: fit_refs(&examples, spec)?.with_layout(layout.clone()),
        },
        Strategy::Ensemble => ModelKind::Ensemble {
            ensemble: fit_ensemble_refs(&examples, spec, config.strategy.members, spec.seed)?
                .with_layout(&layout),
        },
    };
    Ok(ModelFile {
        format: MODEL_FORMAT.into(),
        feature_layout_version: layout,
        pipeline: config.clone(),
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectPrediction {
    pub subject_id: String,
    /// Estimated event day, as days after the recording start.
    pub d_hat_day_offset: f64,
    pub estimated_date: NaiveDate,
    pub n_windows_used: usize,
    pub fallback_used: bool,
}

/// Estimate every subject's event day from windows before `observe_day`
/// (days since each recording's start). `uq_th` overrides the threshold
/// stored with an ensemble model.
pub fn predict(
    file: &ModelFile,
    dataset: &Dataset,
    observe_day: i64,
    uq_th: Option<f64>,
) -> Result<Vec<SubjectPrediction>> {
    let pipeline = FeaturePipeline::new(&file.pipeline)?;
    if pipeline.layout_version() != file.feature_layout_version {
        return Err(Error::LayoutMismatch(format!(
            "model expects {:?}, pipeline produces {:?}",
            file.feature_layout_version,
            pipeline.layout_version()
        )));
    }
    let uq_th = uq_th.or(file.pipeline.strategy.uq_th);
    dataset
        .recordings
        .iter()
        .map(|rec| {
            let features = pipeline.featurize(rec)?;
            let estimates = window_estimates(file.predictor(), &features, uq_th)?;
            let s = aggregate(&estimates, observe_day).map_err(|e| match e {
                Error::NothingObserved { observation_day, .. } => Error::NothingObserved {
                    subject_id: rec.subject_id.clone(),
                    observation_day,
                },
                e => e,
            })?;
            let days = s.d_hat.round();
            let estimated_date = if days >= 0.0 {
                rec.start_day.checked_add_days(Days::new(days as u64))
            } else {
                rec.start_day.checked_sub_days(Days::new((-days) as u64))
            }
            .ok_or_else(|| Error::Training(format!("estimated day {days} out of calendar range")))?;
            Ok(SubjectPrediction {
                subject_id: s.subject_id,
                d_hat_day_offset: s.d_hat,
                estimated_date,
                n_windows_used: s.n_windows_used,
                fallback_used: s.fallback_used,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_dataset;
    use crate::synth::{generate, SynthConfig};

    fn tiny() -> (Dataset, PipelineConfig) {
        let synth = SynthConfig {
            n_subjects: 4,
            days_min: 12,
            days_max: 16,
            signature_onset_days_before: 6,
            ..SynthConfig::default()
        };
        let mut config = PipelineConfig::default();
        config.window.seconds = 3600;
        config.regressor.n_trees = 20;
        (generate(&synth).unwrap(), config)
    }

    #[test]
    fn round_trip_is_exact_and_deterministic() {
        let (data, config) = tiny();
        let set = build_dataset(&data, &config).unwrap();
        let a = train(&set, &config).unwrap();
        let b = train(&set, &config).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        a.save(&path).unwrap();
        let loaded = ModelFile::load(&path).unwrap();
        assert_eq!(loaded, a);
        assert_eq!(loaded.to_json().unwrap(), a.to_json().unwrap());
    }

    #[test]
    fn predicts_each_subject() {
        let (data, mut config) = tiny();
        config.strategy.kind = Strategy::Ensemble;
        config.strategy.uq_th = Some(1e9);
        let set = build_dataset(&data, &config).unwrap();
        let file = train(&set, &config).unwrap();
        let preds = predict(&file, &data, 5, None).unwrap();
        assert_eq!(preds.len(), 4);
        for (p, rec) in preds.iter().zip(&data.recordings) {
            assert_eq!(p.subject_id, rec.subject_id);
            assert_eq!(p.n_windows_used, 5 * 24);
            assert!(!p.fallback_used);
        }
        assert!(matches!(predict(&file, &data, 0, None), Err(Error::NothingObserved { .. })));
    }

    #[test]
    fn rejects_other_layout() {
        let (data, config) = tiny();
        let set = build_dataset(&data, &config).unwrap();
        let mut file = train(&set, &config).unwrap();
        file.pipeline.wavelet.scales = 6;
        assert!(matches!(predict(&file, &data, 3, None), Err(Error::LayoutMismatch(_))));
    }
}
