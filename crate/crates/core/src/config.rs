//! Pipeline configuration.
//!
//! Every field has a default. A TOML file may override any subset, one table
//! per stage:
//!
//! ```toml
//! [preprocess]
//! notch_hz = [50.0, 100.0]
//! lowpass_hz = 0.4
//!
//! [window]
//! seconds = 86400
//!
//! [wavelet]
//! scales = 8
//! omega0 = 6.0
//!
//! [features]
//! entropy_bins = 64
//! time_domain = false
//!
//! [regressor]
//! n_trees = 300
//! seed = 7
//!
//! [strategy]
//! kind = "ensemble"
//! uq_th = 20.0
//!
//! [evaluate]
//! bin_width = 5.0
//! rolling_n = 7
//! ```
//!
//! Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureConfig;
use crate::preprocess::{ChainConfig, SECONDS_PER_DAY};
use crate::regress::{RegressorSpec, DEFAULT_MEMBERS};
use crate::wavelet::{DEFAULT_OMEGA0, DEFAULT_SCALES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub seconds: u64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            seconds: SECONDS_PER_DAY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletConfig {
    pub scales: usize,
    /// Only `"morlet"` is supported.
    pub wavelet: String,
    pub omega0: f64,
}

impl Default for WaveletConfig {
    fn default() -> Self {
        Self {
            scales: DEFAULT_SCALES,
            wavelet: "morlet".into(),
            omega0: DEFAULT_OMEGA0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Single,
    Ensemble,
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(Strategy::Single),
            "ensemble" => Ok(Strategy::Ensemble),
            other => Err(Error::Config(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: Strategy,
    /// Largest accepted full width of a window's 95 % interval, in days.
    /// Required for the ensemble strategy.
    pub uq_th: Option<f64>,
    pub members: usize,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            kind: Strategy::Single,
            uq_th: None,
            members: DEFAULT_MEMBERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub bin_width: f64,
    pub rolling_n: usize,
    pub tlag_min: i64,
    pub tlag_max: i64,
    /// Calibration bins with fewer samples are flagged.
    pub min_bin_support: usize,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        Self {
            bin_width: 5.0,
            rolling_n: 7,
            tlag_min: -29,
            tlag_max: 0,
            min_bin_support: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub preprocess: ChainConfig,
    pub window: WindowConfig,
    pub wavelet: WaveletConfig,
    pub features: FeatureConfig,
    pub regressor: RegressorSpec,
    pub strategy: StrategyConfig,
    pub evaluate: EvaluateConfig,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let p = &self.preprocess;
        if !(p.target_hz > 0.0) {
            return bad(format!("preprocess.target_hz must be positive, got {}", p.target_hz));
        }
        if !(p.notch_q > 0.0 && p.lowpass_q > 0.0) {
            return bad("preprocess q factors must be positive".into());
        }
        if self.window.seconds == 0 {
            return bad("window.seconds must be positive".into());
        }
        if self.wavelet.wavelet != "morlet" {
            return bad(format!("unsupported wavelet {:?}", self.wavelet.wavelet));
        }
        if self.wavelet.scales < 2 {
            return bad("wavelet.scales must be at least 2".into());
        }
        if !(self.wavelet.omega0 > 0.0) {
            return bad("wavelet.omega0 must be positive".into());
        }
        if self.features.entropy_bins == 0 {
            return bad("features.entropy_bins must be positive".into());
        }
        self.regressor.validate()?;
        if self.strategy.members < 2 {
            return bad("strategy.members must be at least 2".into());
        }
        if let Some(th) = self.strategy.uq_th {
            if th.is_nan() || th < 0.0 {
                return bad(format!("strategy.uq_th must be non-negative, got {th}"));
            }
        }
        let e = &self.evaluate;
        if !(e.bin_width > 0.0) {
            return bad("evaluate.bin_width must be positive".into());
        }
        if e.rolling_n == 0 {
            return bad("evaluate.rolling_n must be positive".into());
        }
        if e.tlag_min > e.tlag_max {
            return bad("evaluate.tlag_min exceeds tlag_max".into());
        }
        Ok(())
    }

    /// The ensemble strategy cannot run without a threshold.
    pub fn require_uq_th(&self) -> Result<Option<f64>> {
        match (self.strategy.kind, self.strategy.uq_th) {
            (Strategy::Ensemble, None) => Err(Error::Config(
                "strategy ensemble requires uq_th (--uq-th)".into(),
            )),
            (Strategy::Ensemble, th) => Ok(th),
            (Strategy::Single, _) => Ok(None),
        }
    }
}
