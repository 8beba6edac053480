//! Per-scale window descriptors and supervised dataset assembly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::ingest::{Dataset, Recording};
use crate::preprocess::{self, ConditionedSignal, SignalWindow};
use crate::wavelet::{self, CwtEngine, MotherWavelet, ScalePlan, TransformedWindow};

pub const FEATURES_PER_SCALE: usize = 14;
pub const DEFAULT_ENTROPY_BINS: usize = 64;

/// Names of the per-scale block entries, in vector order.
pub const FEATURE_NAMES: [&str; FEATURES_PER_SCALE] = [
    "energy",
    "p5",
    "p25",
    "median",
    "mean",
    "p75",
    "p95",
    "std",
    "min",
    "max",
    "entropy",
    "zero_crossings",
    "mean_crossings",
    "rms",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleFeatures {
    pub energy: f64,
    pub p5: f64,
    pub p25: f64,
    pub median: f64,
    pub mean: f64,
    pub p75: f64,
    pub p95: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Shannon entropy (nats) of an equal-width histogram over `[min, max]`.
    pub entropy: f64,
    pub zero_crossings: u64,
    pub mean_crossings: u64,
    pub rms: f64,
}

impl ScaleFeatures {
    pub fn to_array(&self) -> [f64; FEATURES_PER_SCALE] {
        [
            self.energy,
            self.p5,
            self.p25,
            self.median,
            self.mean,
            self.p75,
            self.p95,
            self.std,
            self.min,
            self.max,
            self.entropy,
            self.zero_crossings as f64,
            self.mean_crossings as f64,
            self.rms,
        ]
    }
}

/// Linear interpolation between closest ranks on sorted data.
pub(crate) fn percentile_sorted(sorted: &[f64], pct: f64) -> f64 {
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = rank - lo as f64;
    if frac == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

/// Strict sign changes of `x - level` between consecutive samples.
fn crossings(x: &[f64], level: f64) -> u64 {
    x.windows(2)
        .filter(|p| {
            let (a, b) = (p[0] - level, p[1] - level);
            (a < 0.0 && b > 0.0) || (a > 0.0 && b < 0.0)
        })
        .count() as u64
}

fn histogram_entropy(sorted: &[f64], bins: usize) -> f64 {
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let span = max - min;
    if !(span > 0.0) || bins < 2 {
        return 0.0;
    }
    let mut counts = vec![0u64; bins];
    for &v in sorted {
        let b = (((v - min) / span) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    let n = sorted.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum::<f64>()
        .max(0.0)
}

pub fn extract_scale_features(coeffs: &[f64]) -> ScaleFeatures {
    extract_scale_features_with(coeffs, DEFAULT_ENTROPY_BINS)
}

/// Descriptor of one coefficient series. Distributional entries are computed
/// from the sorted values, so they do not depend on sample order.
///
/// Panics when `coeffs` has fewer than two samples.
pub fn extract_scale_features_with(coeffs: &[f64], entropy_bins: usize) -> ScaleFeatures {
    assert!(coeffs.len() >= 2, "need at least two samples");
    let mut sorted = coeffs.to_vec();
    radsort::sort(&mut sorted);
    let n = sorted.len() as f64;

    let energy: f64 = sorted.iter().map(|v| v * v).sum();
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;

    ScaleFeatures {
        energy,
        p5: percentile_sorted(&sorted, 5.0),
        p25: percentile_sorted(&sorted, 25.0),
        median: percentile_sorted(&sorted, 50.0),
        mean,
        p75: percentile_sorted(&sorted, 75.0),
        p95: percentile_sorted(&sorted, 95.0),
        std: var.sqrt(),
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        entropy: histogram_entropy(&sorted, entropy_bins),
        zero_crossings: crossings(coeffs, 0.0),
        mean_crossings: crossings(coeffs, mean),
        rms: (energy / n).sqrt(),
    }
}

/// `F_i`: per-scale blocks concatenated scale-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub subject_id: String,
    pub window_index: usize,
    pub day_offset: i64,
    pub values: Vec<f64>,
}

pub fn build_feature_vector(
    tw: &TransformedWindow,
    plan: &ScalePlan,
    subject_id: &str,
    day_offset: i64,
    entropy_bins: usize,
) -> Result<FeatureVector> {
    if tw.coefficients.len() != plan.k() {
        return Err(Error::LayoutMismatch(format!(
            "transformed window has {} scales, plan has {}",
            tw.coefficients.len(),
            plan.k()
        )));
    }
    let values = tw
        .coefficients
        .iter()
        .flat_map(|c| extract_scale_features_with(c, entropy_bins).to_array())
        .collect();
    Ok(FeatureVector {
        subject_id: subject_id.to_string(),
        window_index: tw.window_index,
        day_offset,
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub entropy_bins: usize,
    /// Skip the CWT and describe the raw window with one block.
    pub time_domain: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            entropy_bins: DEFAULT_ENTROPY_BINS,
            time_domain: false,
        }
    }
}

/// Conditioning, windowing, CWT and description for one configuration.
#[derive(Debug)]
pub struct FeaturePipeline {
    config: PipelineConfig,
    window_len: usize,
    engine: Option<CwtEngine>,
}

impl FeaturePipeline {
    pub fn new(config: &PipelineConfig) -> Result<Self> {
        let rate = config.preprocess.target_hz;
        let window_len = preprocess::window_len(rate, config.window.seconds)?;
        let engine = if config.features.time_domain {
            None
        } else {
            let mother = MotherWavelet::Morlet {
                omega0: config.wavelet.omega0,
            };
            let plan = wavelet::plan_scales_with(rate, window_len, config.wavelet.scales, mother)?;
            Some(CwtEngine::new(plan))
        };
        Ok(Self {
            config: config.clone(),
            window_len,
            engine,
        })
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn plan(&self) -> Option<&ScalePlan> {
        self.engine.as_ref().map(CwtEngine::plan)
    }

    pub fn n_features(&self) -> usize {
        self.plan().map_or(1, ScalePlan::k) * FEATURES_PER_SCALE
    }

    /// Identifies the feature layout; models refuse vectors from another one.
    pub fn layout_version(&self) -> String {
        let bins = self.config.features.entropy_bins;
        match self.plan() {
            None => format!("sprout-features/v1;time-domain;bins={bins};n={}", self.n_features()),
            Some(plan) => format!(
                "sprout-features/v1;cwt;{};k={};w={};bins={bins};n={}",
                plan.mother.tag(),
                plan.k(),
                plan.window_len,
                self.n_features()
            ),
        }
    }

    pub fn condition(&self, rec: &Recording) -> Result<ConditionedSignal> {
        preprocess::condition(&ConditionedSignal::from_recording(rec), &self.config.preprocess)
    }

    pub fn windows(&self, rec: &Recording) -> Result<Vec<SignalWindow>> {
        preprocess::segment(&self.condition(rec)?, self.config.window.seconds)
    }

    pub fn scalogram(&self, window: &SignalWindow) -> Result<Option<TransformedWindow>> {
        self.engine.as_ref().map(|e| e.transform(window)).transpose()
    }

    pub fn describe(&self, window: &SignalWindow) -> Result<FeatureVector> {
        let bins = self.config.features.entropy_bins;
        match &self.engine {
            Some(engine) => {
                let tw = engine.transform(window)?;
                build_feature_vector(&tw, engine.plan(), &window.subject_id, window.day_offset, bins)
            }
            None => {
                if window.samples.len() != self.window_len {
                    return Err(Error::LengthMismatch {
                        expected: self.window_len,
                        actual: window.samples.len(),
                    });
                }
                Ok(FeatureVector {
                    subject_id: window.subject_id.clone(),
                    window_index: window.window_index,
                    day_offset: window.day_offset,
                    values: extract_scale_features_with(&window.samples, bins)
                        .to_array()
                        .to_vec(),
                })
            }
        }
    }

    pub fn featurize(&self, rec: &Recording) -> Result<Vec<FeatureVector>> {
        self.windows(rec)?.iter().map(|w| self.describe(w)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    /// Whole days from the window's day to the event day.
    pub target_days: f64,
}

/// All labelled windows of one subject, ordered by window index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectExamples {
    pub subject_id: String,
    pub storage_temp_c: i32,
    /// Event day as an offset from the recording start.
    pub sprouting_offset: i64,
    pub examples: Vec<LabeledExample>,
}

impl SubjectExamples {
    /// Label the windows of `rec`. Windows recorded after the event day are
    /// dropped, so every target is non-negative.
    pub fn from_recording(rec: &Recording, pipeline: &FeaturePipeline) -> Result<Self> {
        let sprouting_offset = rec.sprouting_offset().ok_or_else(|| Error::MissingGroundTruth {
            subject_id: rec.subject_id.clone(),
        })?;
        let examples = pipeline
            .featurize(rec)?
            .into_iter()
            .filter(|fv| fv.day_offset <= sprouting_offset)
            .map(|fv| LabeledExample {
                target_days: (sprouting_offset - fv.day_offset) as f64,
                features: fv,
            })
            .collect();
        Ok(Self {
            subject_id: rec.subject_id.clone(),
            storage_temp_c: rec.storage_temp_c,
            sprouting_offset,
            examples,
        })
    }

    pub fn window_count(&self) -> usize {
        self.examples.len()
    }
}

/// The supervised dataset `(X, Y)` grouped by subject, sorted by subject id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub layout_version: String,
    pub n_features: usize,
    pub subjects: Vec<SubjectExamples>,
}

impl LabeledSet {
    pub fn new(layout_version: String, n_features: usize, mut subjects: Vec<SubjectExamples>) -> Self {
        subjects.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
        Self {
            layout_version,
            n_features,
            subjects,
        }
    }

    pub fn examples(&self) -> impl Iterator<Item = &LabeledExample> {
        self.subjects.iter().flat_map(|s| s.examples.iter())
    }

    pub fn len(&self) -> usize {
        self.subjects.iter().map(SubjectExamples::window_count).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `M_j` per subject.
    pub fn windows_per_subject(&self) -> Vec<(String, usize)> {
        self.subjects
            .iter()
            .map(|s| (s.subject_id.clone(), s.window_count()))
            .collect()
    }
}

pub fn build_dataset(dataset: &Dataset, config: &PipelineConfig) -> Result<LabeledSet> {
    dataset.require_ground_truth()?;
    let pipeline = FeaturePipeline::new(config)?;
    let subjects = dataset
        .recordings
        .par_iter()
        .map(|rec| SubjectExamples::from_recording(rec, &pipeline))
        .collect::<Result<Vec<_>>>()?;
    Ok(LabeledSet::new(
        pipeline.layout_version(),
        pipeline.n_features(),
        subjects,
    ))
}
