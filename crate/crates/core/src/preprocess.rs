//! Signal conditioning: mains notches, biquad low-pass, integer decimation,
//! and segmentation into non-overlapping windows.
//!
//! Filters use the RBJ audio-EQ-cookbook biquad coefficients and run causally
//! from zero initial state.

use std::f64::consts::PI;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Recording;

pub const SECONDS_PER_DAY: u64 = 86_400;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSignal {
    pub subject_id: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
    pub start_day: NaiveDate,
}

impl ConditionedSignal {
    pub fn from_recording(rec: &Recording) -> Self {
        Self {
            subject_id: rec.subject_id.clone(),
            sample_rate_hz: rec.sample_rate_hz,
            samples: rec.samples.clone(),
            start_day: rec.start_day,
        }
    }

    fn with_samples(&self, samples: Vec<f64>, sample_rate_hz: f64) -> Self {
        Self {
            subject_id: self.subject_id.clone(),
            sample_rate_hz,
            samples,
            start_day: self.start_day,
        }
    }

    fn nyquist(&self) -> f64 {
        self.sample_rate_hz / 2.0
    }
}

/// Normalised second-order section (`a0 == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    fn from_raw(b: [f64; 3], a: [f64; 3]) -> Self {
        Self {
            b0: b[0] / a[0],
            b1: b[1] / a[0],
            b2: b[2] / a[0],
            a1: a[1] / a[0],
            a2: a[2] / a[0],
        }
    }

    pub fn notch(sample_rate_hz: f64, center_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * center_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        Self::from_raw([1.0, -2.0 * cos, 1.0], [1.0 + alpha, -2.0 * cos, 1.0 - alpha])
    }

    pub fn lowpass(sample_rate_hz: f64, cutoff_hz: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff_hz / sample_rate_hz;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let b1 = 1.0 - cos;
        Self::from_raw([b1 / 2.0, b1, b1 / 2.0], [1.0 + alpha, -2.0 * cos, 1.0 - alpha])
    }

    /// Run the section over `input` (transposed direct form II, zero state).
    pub fn apply(&self, input: &[f64]) -> Vec<f64> {
        let (mut z1, mut z2) = (0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + z1;
                z1 = self.b1 * x - self.a1 * y + z2;
                z2 = self.b2 * x - self.a2 * y;
                y
            })
            .collect()
    }

    /// Magnitude response at `freq_hz`.
    pub fn gain_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz;
        let z1 = (w.cos(), -w.sin());
        let z2 = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b0 + self.b1 * z1.0 + self.b2 * z2.0,
            self.b1 * z1.1 + self.b2 * z2.1,
        );
        let den = (
            1.0 + self.a1 * z1.0 + self.a2 * z2.0,
            self.a1 * z1.1 + self.a2 * z2.1,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

fn check_below_nyquist(what: &'static str, value: f64, signal: &ConditionedSignal) -> Result<()> {
    if !(value > 0.0 && value < signal.nyquist()) {
        return Err(Error::AboveNyquist {
            what,
            value,
            nyquist: signal.nyquist(),
        });
    }
    Ok(())
}

pub fn notch_filter(signal: &ConditionedSignal, center_hz: f64, q: f64) -> Result<ConditionedSignal> {
    check_below_nyquist("notch center", center_hz, signal)?;
    if !(q > 0.0) {
        return Err(Error::Config(format!("notch q must be positive, got {q}")));
    }
    let filtered = Biquad::notch(signal.sample_rate_hz, center_hz, q).apply(&signal.samples);
    Ok(signal.with_samples(filtered, signal.sample_rate_hz))
}

pub fn biquad_lowpass(signal: &ConditionedSignal, cutoff_hz: f64, q: f64) -> Result<ConditionedSignal> {
    check_below_nyquist("low-pass cutoff", cutoff_hz, signal)?;
    if !(q > 0.0) {
        return Err(Error::Config(format!("low-pass q must be positive, got {q}")));
    }
    let filtered = Biquad::lowpass(signal.sample_rate_hz, cutoff_hz, q).apply(&signal.samples);
    Ok(signal.with_samples(filtered, signal.sample_rate_hz))
}

/// Integer decimation ratio between two rates, if there is one.
pub fn decimation_ratio(from_hz: f64, to_hz: f64) -> Result<usize> {
    let err = || Error::NonIntegerRatio {
        from: from_hz,
        to: to_hz,
    };
    if !(to_hz > 0.0 && from_hz > 0.0) {
        return Err(err());
    }
    let ratio = from_hz / to_hz;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio {
        return Err(err());
    }
    Ok(rounded as usize)
}

/// Keep every `ratio`-th sample, starting with the first.
pub fn downsample(signal: &ConditionedSignal, target_hz: f64) -> Result<ConditionedSignal> {
    let ratio = decimation_ratio(signal.sample_rate_hz, target_hz)?;
    let kept = signal.samples.iter().step_by(ratio).copied().collect();
    Ok(signal.with_samples(kept, target_hz))
}

/// Parameters of the full conditioning chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainConfig {
    pub notch_hz: Vec<f64>,
    pub notch_q: f64,
    /// Anti-alias cut-off applied before decimation.
    pub lowpass_hz: f64,
    pub lowpass_q: f64,
    pub target_hz: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            notch_hz: vec![50.0, 100.0],
            notch_q: 30.0,
            lowpass_hz: 0.4,
            lowpass_q: std::f64::consts::FRAC_1_SQRT_2,
            target_hz: 1.0,
        }
    }
}

/// Notches, low-pass, then decimation to `target_hz`. Signals already at the
/// target rate pass through untouched.
pub fn condition(signal: &ConditionedSignal, chain: &ChainConfig) -> Result<ConditionedSignal> {
    if signal.sample_rate_hz == chain.target_hz {
        return Ok(signal.clone());
    }
    decimation_ratio(signal.sample_rate_hz, chain.target_hz)?;
    let mut out = signal.clone();
    for &f in &chain.notch_hz {
        out = notch_filter(&out, f, chain.notch_q)?;
    }
    out = biquad_lowpass(&out, chain.lowpass_hz, chain.lowpass_q)?;
    downsample(&out, chain.target_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalWindow {
    pub subject_id: String,
    /// 1-based position within the subject's recording.
    pub window_index: usize,
    /// Whole days since the recording started.
    pub day_offset: i64,
    pub samples: Vec<f64>,
}

/// Samples per window for a given rate, or an error when the product is not
/// a whole number of at least two samples.
pub fn window_len(sample_rate_hz: f64, window_seconds: u64) -> Result<usize> {
    let exact = sample_rate_hz * window_seconds as f64;
    let len = exact.round();
    if len < 2.0 || (exact - len).abs() > 1e-9 * exact {
        return Err(Error::Config(format!(
            "window of {window_seconds} s at {sample_rate_hz} Hz must span a whole number (>= 2) of samples"
        )));
    }
    Ok(len as usize)
}

/// Cut into `floor(len / W)` disjoint windows; a trailing partial window is
/// dropped.
pub fn segment(signal: &ConditionedSignal, window_seconds: u64) -> Result<Vec<SignalWindow>> {
    let w = window_len(signal.sample_rate_hz, window_seconds)?;
    Ok(signal
        .samples
        .chunks_exact(w)
        .enumerate()
        .map(|(i, chunk)| SignalWindow {
            subject_id: signal.subject_id.clone(),
            window_index: i + 1,
            day_offset: (i as u64 * window_seconds / SECONDS_PER_DAY) as i64,
            samples: chunk.to_vec(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signal(rate: f64, samples: Vec<f64>) -> ConditionedSignal {
        ConditionedSignal {
            subject_id: "s".into(),
            sample_rate_hz: rate,
            samples,
            start_day: NaiveDate::from_ymd_opt(2024, 1, 1).unwrap(),
        }
    }

    fn tone(rate: f64, freq: f64, seconds: f64) -> Vec<f64> {
        let n = (rate * seconds) as usize;
        (0..n)
            .map(|i| (2.0 * PI * freq * i as f64 / rate).sin())
            .collect()
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn peak(x: &[f64]) -> f64 {
        x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn notch_removes_mains_tone() {
        let input = tone(256.0, 50.0, 20.0);
        let out = notch_filter(&signal(256.0, input.clone()), 50.0, 30.0).unwrap();
        assert_eq!(out.samples.len(), input.len());
        let settled = 2 * 256;
        let ratio = rms(&out.samples[settled..]) / rms(&input[settled..]);
        assert!(ratio < 0.05, "residual ratio {ratio}");
    }

    #[test]
    fn notch_passes_dc() {
        let out = notch_filter(&signal(256.0, vec![1.5; 256 * 10]), 50.0, 30.0).unwrap();
        for v in &out.samples[6 * 256..] {
            assert!((v - 1.5).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn filters_reject_nyquist() {
        let s = signal(256.0, vec![0.0; 16]);
        assert!(matches!(notch_filter(&s, 200.0, 30.0), Err(Error::AboveNyquist { .. })));
        assert!(matches!(notch_filter(&s, 128.0, 30.0), Err(Error::AboveNyquist { .. })));
        assert!(matches!(biquad_lowpass(&s, 130.0, 0.7), Err(Error::AboveNyquist { .. })));
    }

    #[test]
    fn lowpass_keeps_slow_tone() {
        // 0.01 Hz tone, 600 s: skip the first period, then compare peaks.
        let input = tone(256.0, 0.01, 600.0);
        let out = biquad_lowpass(&signal(256.0, input), 0.4, 0.707).unwrap();
        let amp = peak(&out.samples[100 * 256..]);
        assert!((amp - 1.0).abs() < 0.05, "amplitude {amp}");
    }

    #[test]
    fn lowpass_kills_fast_tone() {
        let input = tone(256.0, 100.0, 20.0);
        let out = biquad_lowpass(&signal(256.0, input), 0.4, 0.707).unwrap();
        let amp = peak(&out.samples[5 * 256..]);
        assert!(amp < 0.01, "amplitude {amp}");
    }

    #[test]
    fn lowpass_of_zero_is_zero() {
        let out = biquad_lowpass(&signal(256.0, vec![0.0; 1000]), 0.4, 0.707).unwrap();
        assert!(out.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gain_matches_design() {
        let lp = Biquad::lowpass(256.0, 0.4, std::f64::consts::FRAC_1_SQRT_2);
        assert!((lp.gain_at(0.0, 256.0) - 1.0).abs() < 1e-9);
        assert!((lp.gain_at(0.4, 256.0) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
        let n = Biquad::notch(256.0, 50.0, 30.0);
        assert!(n.gain_at(50.0, 256.0) < 1e-9);
    }

    #[test]
    fn downsample_counts() {
        let s = signal(256.0, vec![1.0; 256]);
        let d = downsample(&s, 1.0).unwrap();
        assert_eq!(d.samples.len(), 1);
        assert_eq!(d.sample_rate_hz, 1.0);
        let s = signal(256.0, (0..2560).map(f64::from).collect());
        let d = downsample(&s, 1.0).unwrap();
        assert_eq!(d.samples, (0..10).map(|i| f64::from(i * 256)).collect::<Vec<_>>());
        assert!(matches!(downsample(&s, 3.0), Err(Error::NonIntegerRatio { .. })));
    }

    #[test]
    fn full_chain_reduces_length_256x() {
        let s = signal(256.0, tone(256.0, 0.05, 100.0));
        let out = condition(&s, &ChainConfig::default()).unwrap();
        assert_eq!(out.samples.len() * 256, s.samples.len());
        assert_eq!(out.sample_rate_hz, 1.0);
    }

    #[test]
    fn chain_is_identity_at_target_rate() {
        let s = signal(1.0, vec![1.0, 2.0, 3.0]);
        assert_eq!(condition(&s, &ChainConfig::default()).unwrap(), s);
    }

    #[test]
    fn segment_days() {
        let s = signal(1.0, vec![0.5; 259_200]);
        let w = segment(&s, 86_400).unwrap();
        assert_eq!(w.len(), 3);
        assert!(w.iter().all(|w| w.samples.len() == 86_400));
        assert_eq!(w.iter().map(|w| w.day_offset).collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(w.iter().map(|w| w.window_index).collect::<Vec<_>>(), [1, 2, 3]);

        let s = signal(1.0, vec![0.5; 216_000]);
        assert_eq!(segment(&s, 86_400).unwrap().len(), 2);

        let s = signal(1.0, vec![]);
        assert!(segment(&s, 86_400).unwrap().is_empty());
    }

    #[test]
    fn sub_day_windows_share_day_offset() {
        let s = signal(1.0, vec![0.0; 86_400 * 2]);
        let w = segment(&s, 21_600).unwrap();
        assert_eq!(w.len(), 8);
        assert_eq!(
            w.iter().map(|w| w.day_offset).collect::<Vec<_>>(),
            [0, 0, 0, 0, 1, 1, 1, 1]
        );
    }

    #[test]
    fn segment_rejects_degenerate_window() {
        let s = signal(1.0, vec![0.0; 10]);
        assert!(segment(&s, 1).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn filters_are_linear(
                x in prop::collection::vec(-10.0f64..10.0, 64..512),
                seed in any::<u64>(),
                a in -5.0f64..5.0,
                b in -5.0f64..5.0,
            ) {
                let y: Vec<f64> = x.iter().enumerate()
                    .map(|(i, v)| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 / 100.0 - v)
                    .collect();
                let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
                for f in [Biquad::notch(256.0, 50.0, 30.0), Biquad::lowpass(256.0, 0.4, 0.707)] {
                    let fx = f.apply(&x);
                    let fy = f.apply(&y);
                    let fm = f.apply(&mix);
                    let scale = fm.iter().chain(&fx).chain(&fy).fold(1.0f64, |m, v| m.max(v.abs()));
                    for i in 0..x.len() {
                        let expect = a * fx[i] + b * fy[i];
                        prop_assert!((fm[i] - expect).abs() <= 1e-9 * scale * (a.abs() + b.abs() + 1.0));
                    }
                }
            }

            #[test]
            fn windows_concatenate_to_prefix(
                x in prop::collection::vec(-1.0f64..1.0, 0..400),
                w in 2u64..50,
            ) {
                let s = signal(1.0, x.clone());
                let windows = segment(&s, w).unwrap();
                let joined: Vec<f64> = windows.iter().flat_map(|w| w.samples.iter().copied()).collect();
                prop_assert_eq!(windows.len(), x.len() / w as usize);
                prop_assert_eq!(&joined[..], &x[..joined.len()]);
            }
        }
    }
}
