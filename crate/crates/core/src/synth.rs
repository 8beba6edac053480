//! Synthetic datasets with a planted pre-event signature.
//!
//! Each subject's trace is a slow sinusoidal drift plus white noise plus short
//! Hann-tapered tone bursts in `signature_band_hz`, one per hour at a jittered
//! position. Burst amplitude is zero until `signature_onset_days_before` days
//! before the event and then ramps linearly to `signature_gain` at the event.
//! Recordings stop at the event day.

use std::f64::consts::PI;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Dataset, Recording};
use crate::preprocess::SECONDS_PER_DAY;

const BURST_SLOT_SECONDS: f64 = 3600.0;
const BURST_SECONDS: f64 = 900.0;
const BURST_JITTER_SECONDS: f64 = 600.0;
const MAINS_HZ: [f64; 2] = [50.0, 100.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub days_min: u32,
    pub days_max: u32,
    pub sample_rate_hz: f64,
    pub signature_band_hz: (f64, f64),
    pub signature_onset_days_before: u32,
    pub signature_gain: f64,
    /// Volts.
    pub noise_std: f64,
    pub drift_amplitude: f64,
    /// Amplitude of 50 Hz and 100 Hz interference; needs a rate above 200 Hz.
    pub mains_amplitude: f64,
    pub storage_temp_c: i32,
    pub start_day: NaiveDate,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 64,
            days_min: 40,
            days_max: 80,
            sample_rate_hz: 1.0,
            signature_band_hz: (0.01, 0.05),
            signature_onset_days_before: 20,
            signature_gain: 4.0,
            noise_std: 0.5,
            drift_amplitude: 2.0,
            mains_amplitude: 0.0,
            storage_temp_c: 8,
            start_day: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            seed: 7,
        }
    }
}

impl SynthConfig {
    /// Raw acquisition-rate variant: 256 Hz with mains interference.
    pub fn raw_256hz(mut self) -> Self {
        self.sample_rate_hz = 256.0;
        self.mains_amplitude = 1.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_subjects == 0 {
            return bad("n_subjects must be positive".into());
        }
        if self.days_min == 0 || self.days_min > self.days_max {
            return bad(format!(
                "need 0 < days_min <= days_max, got {}..{}",
                self.days_min, self.days_max
            ));
        }
        let rate = self.sample_rate_hz;
        if !(rate.is_finite() && rate > 0.0) {
            return bad(format!("sample_rate_hz must be positive, got {rate}"));
        }
        let (lo, hi) = self.signature_band_hz;
        if !(lo > 0.0 && lo <= hi && hi < rate / 2.0) {
            return bad(format!(
                "signature band ({lo}, {hi}) Hz must lie within (0, {}) Hz",
                rate / 2.0
            ));
        }
        if self.signature_onset_days_before == 0 {
            return bad("signature_onset_days_before must be positive".into());
        }
        for (name, v) in [
            ("signature_gain", self.signature_gain),
            ("noise_std", self.noise_std),
            ("drift_amplitude", self.drift_amplitude),
            ("mains_amplitude", self.mains_amplitude),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if self.mains_amplitude > 0.0 && MAINS_HZ[1] >= rate / 2.0 {
            return bad(format!("mains interference needs a rate above 200 Hz, got {rate}"));
        }
        Ok(())
    }

    /// Samples per day; must be a whole number.
    fn samples_per_day(&self) -> Result<usize> {
        let n = self.sample_rate_hz * SECONDS_PER_DAY as f64;
        if (n - n.round()).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "sample_rate_hz {} does not give a whole number of samples per day",
                self.sample_rate_hz
            )));
        }
        Ok(n.round() as usize)
    }
}

pub fn subject_id(index: usize) -> String {
    format!("S{:03}", index + 1)
}

/// Generate subject `index` alone. Randomness depends only on
/// `(config.seed, index)`.
pub fn generate_recording(config: &SynthConfig, index: usize) -> Result<Recording> {
    config.validate()?;
    let per_day = config.samples_per_day()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64);

    let days = rng.random_range(config.days_min..=config.days_max);
    let n = per_day * days as usize;
    let rate = config.sample_rate_hz;
    let dt = 1.0 / rate;

    let drift_period_s = rng.random_range(2.0..6.0) * SECONDS_PER_DAY as f64;
    let drift_phase = rng.random_range(0.0..2.0 * PI);
    let drift_w = 2.0 * PI / drift_period_s;
    let mains_phase: [f64; 2] = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];

    let mut samples = Vec::with_capacity(n);
    let noise = Normal::new(0.0, config.noise_std).map_err(|e| Error::Config(e.to_string()))?;
    for i in 0..n {
        let t = i as f64 * dt;
        let mut v = config.drift_amplitude * (drift_w * t + drift_phase).sin();
        if config.noise_std > 0.0 {
            v += noise.sample(&mut rng);
        }
        if config.mains_amplitude > 0.0 {
            for (f, p) in MAINS_HZ.iter().zip(mains_phase) {
                v += config.mains_amplitude * (2.0 * PI * f * t + p).sin();
            }
        }
        samples.push(v);
    }

    let event_s = days as f64 * SECONDS_PER_DAY as f64;
    let onset_s = config.signature_onset_days_before as f64 * SECONDS_PER_DAY as f64;
    let (f_lo, f_hi) = config.signature_band_hz;
    let burst_len = (BURST_SECONDS * rate).round() as usize;
    let slots = (event_s / BURST_SLOT_SECONDS) as usize;
    for slot in 0..slots {
        // Draw for every slot so the stream does not depend on the gain.
        let jitter = rng.random_range(-BURST_JITTER_SECONDS..=BURST_JITTER_SECONDS);
        let freq = if f_lo < f_hi { rng.random_range(f_lo..f_hi) } else { f_lo };
        let phase = rng.random_range(0.0..2.0 * PI);

        let center = (slot as f64 + 0.5) * BURST_SLOT_SECONDS + jitter;
        let amplitude = config.signature_gain * (1.0 - (event_s - center) / onset_s).clamp(0.0, 1.0);
        if amplitude == 0.0 {
            continue;
        }
        let start = ((center - BURST_SECONDS / 2.0) * rate).round() as usize;
        for k in 0..burst_len {
            let taper = (PI * k as f64 / burst_len as f64).sin().powi(2);
            let t = k as f64 * dt;
            samples[start + k] += amplitude * taper * (2.0 * PI * freq * t + phase).sin();
        }
    }

    let start_day = config.start_day;
    let sprouting_day = start_day
        .checked_add_days(Days::new(days as u64))
        .ok_or_else(|| Error::Config("sprouting day out of calendar range".into()))?;
    let rec = Recording {
        subject_id: subject_id(index),
        variety: "synthetic".into(),
        storage_temp_c: config.storage_temp_c,
        sample_rate_hz: rate,
        start_day,
        sprouting_day: Some(sprouting_day),
        samples,
    };
    rec.validate()?;
    Ok(rec)
}

/// All subjects of `config`, generated in parallel.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let recordings = (0..config.n_subjects)
        .into_par_iter()
        .map(|i| generate_recording(config, i))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(format!("synthetic-seed{}", config.seed), recordings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex, FftPlanner};

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 3,
            days_min: 3,
            days_max: 5,
            sample_rate_hz: 0.1,
            signature_band_hz: (0.01, 0.03),
            signature_onset_days_before: 2,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_and_ends_at_event() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        for rec in &a.recordings {
            let d = rec.sprouting_offset().unwrap();
            assert!((3..=5).contains(&d));
            assert_eq!(rec.samples.len(), d as usize * 8640);
        }
        let mut other = small();
        other.seed = 8;
        assert_ne!(generate(&other).unwrap(), a);
    }

    #[test]
    fn subject_independent_of_count() {
        let mut more = small();
        more.n_subjects = 5;
        assert_eq!(generate_recording(&more, 1).unwrap(), generate(&small()).unwrap().recordings[1]);
    }

    #[test]
    fn gain_zero_has_no_bursts() {
        let cfg = SynthConfig {
            signature_gain: 0.0,
            noise_std: 0.0,
            drift_amplitude: 0.0,
            ..small()
        };
        let rec = generate_recording(&cfg, 0).unwrap();
        assert!(rec.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_invalid() {
        let bad = [
            SynthConfig { days_min: 10, days_max: 5, ..small() },
            SynthConfig { signature_band_hz: (0.01, 0.06), ..small() },
            SynthConfig { noise_std: -1.0, ..small() },
            SynthConfig { n_subjects: 0, ..small() },
            SynthConfig { mains_amplitude: 1.0, ..small() },
        ];
        for cfg in bad {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
        assert!(generate_recording(&SynthConfig { sample_rate_hz: 1.0 / 7.0, ..small() }, 0).is_err());
    }

    fn band_energy(day: &[f64], rate: f64, band: (f64, f64)) -> f64 {
        let n = day.len();
        let mut buf: Vec<Complex<f64>> = day.iter().map(|&v| Complex::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        (1..n / 2)
            .filter(|&k| {
                let f = k as f64 * rate / n as f64;
                f >= band.0 * 0.8 && f <= band.1 * 1.2
            })
            .map(|k| buf[k].norm_sqr())
            .sum()
    }

    #[test]
    fn band_energy_rises_through_onset_horizon() {
        let cfg = SynthConfig {
            n_subjects: 1,
            days_min: 30,
            days_max: 30,
            noise_std: 0.0,
            signature_gain: 10.0,
            ..SynthConfig::default()
        };
        let rec = generate_recording(&cfg, 0).unwrap();
        let per_day = 86_400;
        let energy: Vec<f64> = rec
            .samples
            .chunks_exact(per_day)
            .map(|day| band_energy(day, 1.0, cfg.signature_band_hz))
            .collect();
        assert_eq!(energy.len(), 30);
        let horizon = &energy[30 - 20..];
        for pair in horizon.windows(2) {
            assert!(pair[1] > pair[0], "{:?}", horizon);
        }
        // Before the horizon only drift leaks into the band.
        assert!(energy[..10].iter().all(|&e| e < energy[29] * 1e-3));
    }

    #[test]
    fn raw_mode_carries_mains() {
        let cfg = SynthConfig {
            n_subjects: 1,
            days_min: 1,
            days_max: 1,
            signature_onset_days_before: 1,
            ..SynthConfig::default().raw_256hz()
        };
        let rec = generate_recording(&cfg, 0).unwrap();
        assert_eq!(rec.samples.len(), 86_400 * 256);
        let second = &rec.samples[..256];
        let e50 = band_energy(second, 256.0, (50.0, 50.0));
        let e20 = band_energy(second, 256.0, (20.0, 20.0));
        assert!(e50 > 10.0 * e20, "{e50} vs {e20}");
    }
}
