//! Leave-one-subject-out evaluation and the report built from its folds.
//!
//! Per-window error is averaged within each subject first (`MAE_j`) and then
//! across subjects; the event-day error `ESD_j = |D̂_j - D_j|` is likewise
//! averaged across subjects. Calibration pools `(Y, Ŷ)` over all folds and
//! conditions on `Ŷ`, either exactly or through fixed-width bins.

use std::collections::BTreeMap;
use std::io::Write;
use std::ops::RangeInclusive;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EvaluateConfig, PipelineConfig, Strategy};
use crate::error::{Error, Result};
use crate::estimate::{aggregate, rolling_mean, window_estimates, Predictor, SubjectEstimate, WindowEstimate};
use crate::features::{build_dataset, percentile_sorted, FeatureVector, LabeledExample, LabeledSet};
use crate::ingest::Dataset;
use crate::regress::{fit_ensemble_refs, fit_refs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowOutcome {
    pub estimate: WindowEstimate,
    /// True days until the event.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub held_out_subject: String,
    pub storage_temp_c: i32,
    pub sprouting_offset: i64,
    /// Subjects whose windows trained this fold's model.
    pub training_subjects: Vec<String>,
    pub per_window: Vec<WindowOutcome>,
    /// Aggregate over every window of the held-out subject.
    pub subject_estimate: SubjectEstimate,
    pub mae_j: f64,
    pub esd_j: f64,
    /// MAE of predicting the training-set mean target on the same windows.
    pub baseline_mae_j: f64,
}

impl FoldResult {
    pub fn estimates(&self) -> Vec<WindowEstimate> {
        self.per_window.iter().map(|w| w.estimate.clone()).collect()
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Score one held-out subject given its window estimates.
///
/// `MAE_j` runs over the windows that feed the subject aggregate: the retained
/// set, or the single fallback window when nothing was retained.
pub fn score_subject(
    held_out: &str,
    sprouting_offset: i64,
    outcomes: Vec<WindowOutcome>,
    baseline: f64,
) -> Result<(Vec<WindowOutcome>, SubjectEstimate, f64, f64, f64)> {
    let estimates: Vec<WindowEstimate> = outcomes.iter().map(|w| w.estimate.clone()).collect();
    let observe_all = estimates.iter().map(|e| e.day_offset).max().map_or(0, |d| d + 1);
    let subject = aggregate(&estimates, observe_all).map_err(|e| match e {
        Error::NothingObserved { .. } => Error::Training(format!("held-out subject {held_out} has no windows")),
        e => e,
    })?;

    let used: Vec<&WindowOutcome> = if subject.fallback_used {
        let d = subject.d_hat;
        outcomes.iter().filter(|w| w.estimate.d_hat == d).take(1).collect()
    } else {
        outcomes.iter().filter(|w| w.estimate.retained).collect()
    };
    let mae = mean(used.iter().map(|w| (w.estimate.y_hat - w.y).abs()));
    let baseline_mae = mean(used.iter().map(|w| (baseline - w.y).abs()));
    let esd = (subject.d_hat - sprouting_offset as f64).abs();
    Ok((outcomes, subject, mae, esd, baseline_mae))
}

/// Leave-one-subject-out over an already featurized set.
pub fn loo_cv_labeled(set: &LabeledSet, config: &PipelineConfig) -> Result<Vec<FoldResult>> {
    if set.subjects.len() < 2 {
        return Err(Error::Training(format!(
            "leave-one-out needs at least 2 subjects, got {}",
            set.subjects.len()
        )));
    }
    let uq_th = config.require_uq_th()?;

    (0..set.subjects.len())
        .into_par_iter()
        .map(|j| {
            let held = &set.subjects[j];
            let train: Vec<&LabeledExample> = set
                .subjects
                .iter()
                .filter(|s| s.subject_id != held.subject_id)
                .flat_map(|s| s.examples.iter())
                .collect();
            if let Some(leak) = train.iter().find(|e| e.features.subject_id == held.subject_id) {
                return Err(Error::Training(format!(
                    "leakage: window {} of held-out subject {} is in the training set",
                    leak.features.window_index, held.subject_id
                )));
            }
            let training_subjects: Vec<String> = set
                .subjects
                .iter()
                .filter(|s| s.subject_id != held.subject_id && s.window_count() > 0)
                .map(|s| s.subject_id.clone())
                .collect();

            let features: Vec<FeatureVector> = held.examples.iter().map(|e| e.features.clone()).collect();
            let spec = &config.regressor;
            let estimates = match config.strategy.kind {
                Strategy::Single => {
                    let model = fit_refs(&train, spec)?.with_layout(set.layout_version.clone());
                    window_estimates(Predictor::Single(&model), &features, None)?
                }
                Strategy::Ensemble => {
                    let ens = fit_ensemble_refs(&train, spec, config.strategy.members, spec.seed)?
                        .with_layout(&set.layout_version);
                    window_estimates(Predictor::Ensemble(&ens), &features, uq_th)?
                }
            };
            let outcomes: Vec<WindowOutcome> = estimates
                .into_iter()
                .zip(&held.examples)
                .map(|(estimate, e)| WindowOutcome {
                    estimate,
                    y: e.target_days,
                })
                .collect();

            let baseline = mean(train.iter().map(|e| e.target_days));
            let (per_window, subject_estimate, mae_j, esd_j, baseline_mae_j) =
                score_subject(&held.subject_id, held.sprouting_offset, outcomes, baseline)?;
            Ok(FoldResult {
                held_out_subject: held.subject_id.clone(),
                storage_temp_c: held.storage_temp_c,
                sprouting_offset: held.sprouting_offset,
                training_subjects,
                per_window,
                subject_estimate,
                mae_j,
                esd_j,
                baseline_mae_j,
            })
        })
        .collect()
}

/// Featurize `dataset` and run leave-one-subject-out cross-validation.
pub fn loo_cv(dataset: &Dataset, config: &PipelineConfig) -> Result<Vec<FoldResult>> {
    if dataset.len() < 2 {
        return Err(Error::Training(format!(
            "leave-one-out needs at least 2 subjects, got {}",
            dataset.len()
        )));
    }
    let set = build_dataset(dataset, config)?;
    loo_cv_labeled(&set, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentilePoint {
    pub percentile: f64,
    pub esd: f64,
}

/// ESD percentiles 0, 1, ..., 100 by linear interpolation.
pub fn esd_percentiles(folds: &[FoldResult]) -> Vec<PercentilePoint> {
    let mut esd: Vec<f64> = folds.iter().map(|f| f.esd_j).collect();
    if esd.is_empty() {
        return Vec::new();
    }
    esd.sort_by(f64::total_cmp);
    (0..=100)
        .map(|p| PercentilePoint {
            percentile: p as f64,
            esd: percentile_sorted(&esd, p as f64),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlagPoint {
    pub t_lag: i64,
    /// `None` when no subject had a window before `D_j + t_lag`.
    pub mean_esd: Option<f64>,
    pub n_subjects: usize,
    pub n_excluded: usize,
}

/// Mean ESD when every subject is estimated at `t = D_j + t_lag`.
pub fn tlag_sweep(folds: &[FoldResult], lags: RangeInclusive<i64>) -> Vec<TlagPoint> {
    let estimates: Vec<Vec<WindowEstimate>> = folds.iter().map(FoldResult::estimates).collect();
    lags.map(|t_lag| {
        let errors: Vec<f64> = folds
            .iter()
            .zip(&estimates)
            .filter_map(|(f, e)| {
                aggregate(e, f.sprouting_offset + t_lag)
                    .ok()
                    .map(|s| (s.d_hat - f.sprouting_offset as f64).abs())
            })
            .collect();
        TlagPoint {
            t_lag,
            mean_esd: (!errors.is_empty()).then(|| mean(errors.iter().copied())),
            n_subjects: errors.len(),
            n_excluded: folds.len() - errors.len(),
        }
    })
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Conditioning {
    /// Group samples with bit-identical `Ŷ`.
    Exact,
    /// Group by `floor(Ŷ / width)`.
    Binned { width: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub y_hat_lo: f64,
    pub y_hat_hi: f64,
    pub y_hat_center: f64,
    pub mean_y_hat: f64,
    /// `E[Y | Ŷ in bin]`.
    pub mean_y: f64,
    /// `Std(Y | Ŷ in bin)`, population form.
    pub std_y: f64,
    pub count: usize,
    pub low_support: bool,
}

/// Terms of `Var(Y) = Var(Ŷ) + E[Var(Y|Ŷ)]`, plus `Var(E[Y|Ŷ])` which makes
/// the decomposition exact for any predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub var_y: f64,
    pub var_y_hat: f64,
    pub mean_conditional_var: f64,
    pub var_conditional_mean: f64,
    /// `Var(Y) - Var(Ŷ) - E[Var(Y|Ŷ)]`.
    pub residual: f64,
}

impl VarianceDecomposition {
    pub fn relative_residual(&self) -> f64 {
        if self.var_y == 0.0 {
            self.residual.abs()
        } else {
            self.residual.abs() / self.var_y
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub conditioning: Conditioning,
    pub rolling_n: usize,
    pub bins: Vec<CalibrationBin>,
    pub variance: VarianceDecomposition,
}

fn population_var(values: &[f64]) -> f64 {
    let m = mean(values.iter().copied());
    mean(values.iter().map(|v| (v - m) * (v - m)))
}

/// Condition pooled `(y, y_hat)` pairs on `y_hat`.
pub fn calibration_from_pairs(
    pairs: &[(f64, f64)],
    conditioning: Conditioning,
    min_support: usize,
    rolling_n: usize,
) -> CalibrationTable {
    let mut groups: BTreeMap<i64, Vec<(f64, f64)>> = BTreeMap::new();
    for &(y, y_hat) in pairs {
        let key = match conditioning {
            Conditioning::Exact => {
                // Order-preserving integer key for the float.
                let bits = y_hat.to_bits() as i64;
                if bits < 0 {
                    bits ^ i64::MAX
                } else {
                    bits
                }
            }
            Conditioning::Binned { width } => (y_hat / width).floor() as i64,
        };
        groups.entry(key).or_default().push((y, y_hat));
    }

    let n = pairs.len() as f64;
    let mut bins = Vec::with_capacity(groups.len());
    let mut mean_conditional_var = 0.0;
    let mut cond_means = Vec::with_capacity(pairs.len());
    for (key, members) in &groups {
        let ys: Vec<f64> = members.iter().map(|p| p.0).collect();
        let mean_y = mean(ys.iter().copied());
        let var = population_var(&ys);
        let mean_y_hat = mean(members.iter().map(|p| p.1));
        let (lo, hi) = match conditioning {
            Conditioning::Exact => (members[0].1, members[0].1),
            Conditioning::Binned { width } => (*key as f64 * width, (*key + 1) as f64 * width),
        };
        mean_conditional_var += var * members.len() as f64 / n;
        cond_means.extend(std::iter::repeat_n(mean_y, members.len()));
        bins.push(CalibrationBin {
            y_hat_lo: lo,
            y_hat_hi: hi,
            y_hat_center: (lo + hi) / 2.0,
            mean_y_hat,
            mean_y,
            std_y: var.sqrt(),
            count: members.len(),
            low_support: members.len() < min_support,
        });
    }

    let ys: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y_hats: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let var_y = population_var(&ys);
    let var_y_hat = population_var(&y_hats);
    CalibrationTable {
        conditioning,
        rolling_n,
        bins,
        variance: VarianceDecomposition {
            var_y,
            var_y_hat,
            mean_conditional_var,
            var_conditional_mean: population_var(&cond_means),
            residual: var_y - var_y_hat - mean_conditional_var,
        },
    }
}

/// Per-subject daily predictions (mean over the day's windows), smoothed by a
/// trailing mean of `rolling_n` days, pooled as `(y, y_hat)` pairs.
pub fn calibration_pairs(folds: &[FoldResult], rolling_n: usize) -> Vec<(f64, f64)> {
    let mut pairs = Vec::new();
    for fold in folds {
        let mut days: BTreeMap<i64, (f64, Vec<f64>)> = BTreeMap::new();
        for w in &fold.per_window {
            days.entry(w.estimate.day_offset)
                .or_insert_with(|| (w.y, Vec::new()))
                .1
                .push(w.estimate.y_hat);
        }
        let ys: Vec<f64> = days.values().map(|d| d.0).collect();
        let daily: Vec<f64> = days.values().map(|d| mean(d.1.iter().copied())).collect();
        let smoothed = rolling_mean(&daily, rolling_n);
        pairs.extend(ys.into_iter().zip(smoothed));
    }
    pairs
}

pub fn calibration_curves(
    folds: &[FoldResult],
    conditioning: Conditioning,
    rolling_n: usize,
    min_support: usize,
) -> CalibrationTable {
    let pairs = calibration_pairs(folds, rolling_n);
    calibration_from_pairs(&pairs, conditioning, min_support, rolling_n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMetrics {
    pub subject_id: String,
    pub storage_temp_c: i32,
    pub n_windows: usize,
    pub n_retained: usize,
    pub sprouting_offset: i64,
    pub d_hat: f64,
    pub fallback_used: bool,
    pub mae: f64,
    pub esd: f64,
    pub baseline_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub dataset_label: String,
    pub storage_temps_c: Vec<i32>,
    pub strategy: Strategy,
    pub uq_th: Option<f64>,
    pub n_subjects: usize,
    pub mae: f64,
    pub esd: f64,
    /// Same two-level mean for the constant training-mean predictor.
    pub baseline_mae: f64,
    pub fallback_count: usize,
    pub subjects: Vec<SubjectMetrics>,
    pub esd_percentiles: Vec<PercentilePoint>,
    pub tlag_curve: Vec<TlagPoint>,
    pub calibration: CalibrationTable,
}

/// Assemble the report from fold results. Dataset label and temperatures
/// are left for the caller.
pub fn compute_metrics(folds: &[FoldResult], strategy: Strategy, uq_th: Option<f64>, eval: &EvaluateConfig) -> EvaluationReport {
    let subjects: Vec<SubjectMetrics> = folds
        .iter()
        .map(|f| SubjectMetrics {
            subject_id: f.held_out_subject.clone(),
            storage_temp_c: f.storage_temp_c,
            n_windows: f.per_window.len(),
            n_retained: f.per_window.iter().filter(|w| w.estimate.retained).count(),
            sprouting_offset: f.sprouting_offset,
            d_hat: f.subject_estimate.d_hat,
            fallback_used: f.subject_estimate.fallback_used,
            mae: f.mae_j,
            esd: f.esd_j,
            baseline_mae: f.baseline_mae_j,
        })
        .collect();
    let mut temps: Vec<i32> = folds.iter().map(|f| f.storage_temp_c).collect();
    temps.sort_unstable();
    temps.dedup();
    EvaluationReport {
        dataset_label: String::new(),
        storage_temps_c: temps,
        strategy,
        uq_th,
        n_subjects: folds.len(),
        mae: mean(folds.iter().map(|f| f.mae_j)),
        esd: mean(folds.iter().map(|f| f.esd_j)),
        baseline_mae: mean(folds.iter().map(|f| f.baseline_mae_j)),
        fallback_count: folds.iter().filter(|f| f.subject_estimate.fallback_used).count(),
        subjects,
        esd_percentiles: esd_percentiles(folds),
        tlag_curve: tlag_sweep(folds, eval.tlag_min..=eval.tlag_max),
        calibration: calibration_curves(
            folds,
            Conditioning::Binned {
                width: eval.bin_width,
            },
            eval.rolling_n,
            eval.min_bin_support,
        ),
    }
}

/// Full protocol on an in-memory dataset.
pub fn evaluate_dataset(dataset: &Dataset, config: &PipelineConfig) -> Result<(EvaluationReport, Vec<FoldResult>)> {
    dataset.require_ground_truth()?;
    let set = build_dataset(dataset, config)?;
    let mut report = evaluate_labeled(&set, config)?;
    report.0.dataset_label = dataset.label.clone();
    Ok(report)
}

pub fn evaluate_labeled(set: &LabeledSet, config: &PipelineConfig) -> Result<(EvaluationReport, Vec<FoldResult>)> {
    let folds = loo_cv_labeled(set, config)?;
    let uq_th = config.require_uq_th()?;
    let report = compute_metrics(&folds, config.strategy.kind, uq_th, &config.evaluate);
    Ok((report, folds))
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Plot-ready CSVs: `esd_percentiles.csv`, `tlag.csv`, `calibration.csv`.
    /// The calibration axes are negated (days before the event).
    pub fn write_curves(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            std::fs::File::create(&path)
                .and_then(|mut f| f.write_all(body.as_bytes()))
                .map_err(|e| Error::io(&path, e))
        };

        let mut body = String::from("percentile,esd_days\n");
        for p in &self.esd_percentiles {
            body.push_str(&format!("{},{}\n", p.percentile, p.esd));
        }
        write("esd_percentiles.csv", body)?;

        let mut body = String::from("t_lag,mean_esd_days,n_subjects,n_excluded\n");
        for p in &self.tlag_curve {
            let esd = p.mean_esd.map(|v| v.to_string()).unwrap_or_default();
            body.push_str(&format!("{},{},{},{}\n", p.t_lag, esd, p.n_subjects, p.n_excluded));
        }
        write("tlag.csv", body)?;

        let mut body = String::from("y_hat,mean_y,std_y,count,low_support\n");
        for b in &self.calibration.bins {
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                -b.y_hat_center, -b.mean_y, b.std_y, b.count, b.low_support
            ));
        }
        write("calibration.csv", body)
    }

    pub fn summary(&self) -> String {
        let temps: Vec<String> = self.storage_temps_c.iter().map(|t| format!("{t}°C")).collect();
        let strategy = match (self.strategy, self.uq_th) {
            (Strategy::Single, _) => "single model".to_string(),
            (Strategy::Ensemble, Some(th)) => format!("ensemble, UQ_th = {th} days"),
            (Strategy::Ensemble, None) => "ensemble".to_string(),
        };
        let mut s = format!(
            "dataset {} ({}) | {}\nsubjects: {}\nMAE: {:.2} days (constant-mean baseline {:.2})\nESD: {:.2} days\nfallbacks: {}\n",
            self.dataset_label,
            temps.join(", "),
            strategy,
            self.n_subjects,
            self.mae,
            self.baseline_mae,
            self.esd,
            self.fallback_count
        );
        for p in [25, 50, 75, 90] {
            if let Some(pt) = self.esd_percentiles.get(p) {
                s.push_str(&format!("ESD p{p}: {:.2} days\n", pt.esd));
            }
        }
        let lagged: Vec<String> = self
            .tlag_curve
            .iter()
            .filter(|p| p.t_lag % 5 == 0 || p.t_lag == self.tlag_curve[0].t_lag)
            .map(|p| match p.mean_esd {
                Some(v) => format!("{}:{v:.1}", p.t_lag),
                None => format!("{}:-", p.t_lag),
            })
            .collect();
        s.push_str(&format!("ESD by t_lag: {}\n", lagged.join(" ")));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outcome(subject: &str, day: i64, y: f64, y_hat: f64) -> WindowOutcome {
        WindowOutcome {
            estimate: WindowEstimate {
                subject_id: subject.into(),
                window_index: day as usize + 1,
                day_offset: day,
                y_hat,
                d_hat: day as f64 + y_hat,
                ci_halfwidth: None,
                retained: true,
            },
            y,
        }
    }

    fn fold(subject: &str, d: i64, y_hats: &[f64]) -> FoldResult {
        let outcomes = y_hats
            .iter()
            .enumerate()
            .map(|(i, &yh)| outcome(subject, i as i64, (d - i as i64) as f64, yh))
            .collect();
        let (per_window, subject_estimate, mae_j, esd_j, baseline_mae_j) =
            score_subject(subject, d, outcomes, 0.0).unwrap();
        FoldResult {
            held_out_subject: subject.into(),
            storage_temp_c: 8,
            sprouting_offset: d,
            training_subjects: vec![],
            per_window,
            subject_estimate,
            mae_j,
            esd_j,
            baseline_mae_j,
        }
    }

    #[test]
    fn single_subject_metrics() {
        // D = 10, days 0..3, true Y = 10, 9, 8; errors +1, +2, +3 => D̂_i 11, 12, 13.
        let f = fold("a", 10, &[11.0, 11.0, 11.0]);
        assert_eq!(f.mae_j, 2.0);
        assert_eq!(f.esd_j, 2.0);
        let r = compute_metrics(&[f], Strategy::Single, None, &EvaluateConfig::default());
        assert_eq!(r.mae, 2.0);
        assert_eq!(r.esd, 2.0);
    }

    #[test]
    fn mae_is_two_level() {
        // Subject a: 1 window, error 10. Subject b: 4 windows, error 0.
        let a = fold("a", 5, &[15.0]);
        let b = fold("b", 4, &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(a.mae_j, 10.0);
        assert_eq!(b.mae_j, 0.0);
        let r = compute_metrics(&[a, b], Strategy::Single, None, &EvaluateConfig::default());
        // Pooled per-window mean would be 10 / 5 = 2.
        assert_eq!(r.mae, 5.0);
    }

    #[test]
    fn percentile_curve_endpoints() {
        let a = fold("a", 5, &[5.0, 4.0]); // ESD 0
        let b = fold("b", 5, &[15.0, 14.0]); // ESD 10
        assert_eq!((a.esd_j, b.esd_j), (0.0, 10.0));
        let curve = esd_percentiles(&[a, b]);
        assert_eq!(curve.len(), 101);
        assert_eq!(curve[0].esd, 0.0);
        assert_eq!(curve[100].esd, 10.0);
        assert_eq!(curve[50].esd, 5.0);
        assert!(curve.windows(2).all(|p| p[0].esd <= p[1].esd));
    }

    #[test]
    fn perfect_predictor_everything_zero() {
        let folds: Vec<FoldResult> = [("a", 12i64), ("b", 7), ("c", 30)]
            .iter()
            .map(|&(s, d)| {
                let yh: Vec<f64> = (0..d).map(|i| (d - i) as f64).collect();
                fold(s, d, &yh)
            })
            .collect();
        for f in &folds {
            assert!(f.per_window.iter().all(|w| w.estimate.d_hat == f.sprouting_offset as f64));
        }
        let r = compute_metrics(&folds, Strategy::Single, None, &EvaluateConfig::default());
        assert_eq!((r.mae, r.esd), (0.0, 0.0));
        assert!(r.esd_percentiles.iter().all(|p| p.esd == 0.0));
        for p in &r.tlag_curve {
            if let Some(v) = p.mean_esd {
                assert_eq!(v, 0.0);
            }
        }
        // Subject "b" has only 7 days of windows, so it drops out at t_lag < -6.
        let at = |lag: i64| r.tlag_curve.iter().find(|p| p.t_lag == lag).unwrap().clone();
        assert_eq!(at(-7).n_excluded, 1);
        assert_eq!(at(-6).n_excluded, 0);
        assert_eq!(at(0).mean_esd, Some(r.esd));
    }

    #[test]
    fn oracle_calibration_exact_and_binned() {
        let pairs: Vec<(f64, f64)> = (1..=80).flat_map(|y| [(y as f64, y as f64); 3]).collect();
        let exact = calibration_from_pairs(&pairs, Conditioning::Exact, 1, 1);
        for b in &exact.bins {
            assert_eq!(b.mean_y, b.mean_y_hat);
            assert_eq!(b.std_y, 0.0);
        }
        assert!(exact.variance.relative_residual() < 1e-6);
        assert_eq!(exact.variance.mean_conditional_var, 0.0);

        let binned = calibration_from_pairs(&pairs, Conditioning::Binned { width: 5.0 }, 10, 1);
        for b in &binned.bins {
            assert!((b.mean_y - b.y_hat_center).abs() <= 2.5);
        }
        assert!(binned.variance.relative_residual() <= 0.05);
    }

    #[test]
    fn constant_predictor_single_bin() {
        let ys: Vec<f64> = (1..=40).map(f64::from).collect();
        let m = ys.iter().sum::<f64>() / ys.len() as f64;
        let pairs: Vec<(f64, f64)> = ys.iter().map(|&y| (y, m)).collect();
        let t = calibration_from_pairs(&pairs, Conditioning::Binned { width: 5.0 }, 10, 1);
        assert_eq!(t.bins.len(), 1);
        assert_eq!(t.bins[0].mean_y, m);
        assert_eq!(t.bins[0].count, 40);
        // Var(E[Y|Ŷ]) = 0 and the exact decomposition still holds.
        assert!((t.variance.var_y - t.variance.mean_conditional_var).abs() < 1e-9);
    }

    #[test]
    fn rolling_mean_applied_per_subject() {
        let f = fold("a", 3, &[3.0, 6.0, 0.0]);
        let pairs = calibration_pairs(&[f], 2);
        assert_eq!(pairs, vec![(3.0, 3.0), (2.0, 4.5), (1.0, 3.0)]);
    }

    #[test]
    fn curves_written() {
        let dir = tempfile::tempdir().unwrap();
        let f = fold("a", 3, &[3.0, 2.0, 1.0]);
        let r = compute_metrics(&[f], Strategy::Single, None, &EvaluateConfig::default());
        r.write_curves(dir.path()).unwrap();
        for name in ["esd_percentiles.csv", "tlag.csv", "calibration.csv"] {
            assert!(dir.path().join(name).exists());
        }
        let cal = std::fs::read_to_string(dir.path().join("calibration.csv")).unwrap();
        // Y values 1..3 all fall in bin [0, 5): displayed at -2.5.
        assert!(cal.lines().nth(1).unwrap().starts_with("-2.5,-2,"));
    }
}
