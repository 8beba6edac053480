//! Continuous wavelet transform with a complex Morlet mother wavelet.
//!
//! Each window is mean-removed and circularly convolved with the sampled,
//! unit-L2-norm Morlet kernel of every planned scale; the transform output is
//! the coefficient magnitude per scale and time sample. [`CwtEngine`] caches
//! kernel spectra so a plan can be applied to many windows with one forward
//! and `K` inverse FFTs each. [`cwt_direct`] evaluates the same sums
//! explicitly and serves as the reference implementation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::SignalWindow;

pub const DEFAULT_OMEGA0: f64 = 6.0;
pub const DEFAULT_SCALES: usize = 8;
/// Longest window [`cwt_direct`] accepts; it is O(W^2 K).
pub const DIRECT_MAX_LEN: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum MotherWavelet {
    Morlet { omega0: f64 },
}

impl MotherWavelet {
    pub fn morlet() -> Self {
        MotherWavelet::Morlet {
            omega0: DEFAULT_OMEGA0,
        }
    }

    /// Scale (in samples) whose centre frequency is `freq_hz`.
    pub fn scale_for(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        match *self {
            MotherWavelet::Morlet { omega0 } => omega0 * sample_rate_hz / (2.0 * PI * freq_hz),
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            MotherWavelet::Morlet { omega0 } => format!("morlet(omega0={omega0})"),
        }
    }
}

/// `K` analysis frequencies, geometrically spaced from `rate/4` down to
/// `4/window` Hz, and the matching wavelet scales.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalePlan {
    pub sample_rate_hz: f64,
    pub window_len: usize,
    pub mother: MotherWavelet,
    /// Descending.
    pub frequencies_hz: Vec<f64>,
    pub scales: Vec<f64>,
}

impl ScalePlan {
    pub fn k(&self) -> usize {
        self.frequencies_hz.len()
    }
}

pub fn plan_scales(sample_rate_hz: f64, window_len: usize, k: usize) -> Result<ScalePlan> {
    plan_scales_with(sample_rate_hz, window_len, k, MotherWavelet::morlet())
}

pub fn plan_scales_with(
    sample_rate_hz: f64,
    window_len: usize,
    k: usize,
    mother: MotherWavelet,
) -> Result<ScalePlan> {
    if k < 2 {
        return Err(Error::ScalePlan(format!("need at least 2 scales, got {k}")));
    }
    if window_len < 4 {
        return Err(Error::ScalePlan(format!("window of {window_len} samples is too short")));
    }
    if !(sample_rate_hz > 0.0) {
        return Err(Error::ScalePlan("sample rate must be positive".into()));
    }
    let MotherWavelet::Morlet { omega0 } = mother;
    if !(omega0 > 0.0) {
        return Err(Error::ScalePlan(format!("omega0 must be positive, got {omega0}")));
    }
    let f_max = sample_rate_hz / 4.0;
    let f_min = 4.0 * sample_rate_hz / window_len as f64;
    if f_min >= f_max {
        return Err(Error::ScalePlan(format!(
            "lowest band {f_min} Hz is not below highest band {f_max} Hz; window too short"
        )));
    }
    let step = (f_min / f_max).ln() / (k - 1) as f64;
    let frequencies_hz: Vec<f64> = (0..k)
        .map(|i| match i {
            0 => f_max,
            i if i == k - 1 => f_min,
            i => f_max * (step * i as f64).exp(),
        })
        .collect();
    let scales = frequencies_hz
        .iter()
        .map(|&f| mother.scale_for(f, sample_rate_hz))
        .collect();
    Ok(ScalePlan {
        sample_rate_hz,
        window_len,
        mother,
        frequencies_hz,
        scales,
    })
}

/// Signed circular offset of index `i` in a buffer of length `n`.
fn circular_offset(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Morlet kernel at `scale` sampled at circular offsets of a length-`len`
/// buffer (index 0 is the wavelet centre), normalised to unit L2 norm.
pub fn morlet_kernel(scale: f64, omega0: f64, len: usize) -> Vec<Complex<f64>> {
    let norm = PI.powf(-0.25);
    let mut kernel: Vec<Complex<f64>> = (0..len)
        .map(|i| {
            let t = circular_offset(i, len) / scale;
            Complex::from_polar(norm * (-0.5 * t * t).exp(), omega0 * t)
        })
        .collect();
    let energy: f64 = kernel.iter().map(|c| c.norm_sqr()).sum();
    let inv = 1.0 / energy.sqrt();
    for c in &mut kernel {
        *c *= inv;
    }
    kernel
}

fn plan_kernels(plan: &ScalePlan) -> Vec<Vec<Complex<f64>>> {
    let MotherWavelet::Morlet { omega0 } = plan.mother;
    plan.scales
        .iter()
        .map(|&s| morlet_kernel(s, omega0, plan.window_len))
        .collect()
}

fn demeaned(samples: &[f64]) -> Vec<f64> {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.iter().map(|v| v - mean).collect()
}

/// Scalogram of one window: `coefficients[k][t]` is the CWT magnitude at
/// scale `k`, sample `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformedWindow {
    pub window_index: usize,
    pub coefficients: Vec<Vec<f64>>,
}

/// FFT-backed transform for a fixed plan.
pub struct CwtEngine {
    plan: ScalePlan,
    kernel_spectra: Vec<Vec<Complex<f64>>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CwtEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CwtEngine").field("plan", &self.plan).finish()
    }
}

impl CwtEngine {
    pub fn new(plan: ScalePlan) -> Self {
        let n = plan.window_len;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let kernel_spectra = plan_kernels(&plan)
            .into_iter()
            .map(|mut k| {
                forward.process(&mut k);
                k
            })
            .collect();
        Self {
            plan,
            kernel_spectra,
            forward,
            inverse,
        }
    }

    pub fn plan(&self) -> &ScalePlan {
        &self.plan
    }

    /// Magnitudes per scale for a raw window of `plan.window_len` samples.
    pub fn magnitudes(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.plan.window_len;
        if samples.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                actual: samples.len(),
            });
        }
        let mut spectrum: Vec<Complex<f64>> = demeaned(samples)
            .into_iter()
            .map(|v| Complex::new(v, 0.0))
            .collect();
        self.forward.process(&mut spectrum);

        let inv_n = 1.0 / n as f64;
        let mut scratch = vec![Complex::default(); n];
        let mut out = Vec::with_capacity(self.kernel_spectra.len());
        for kernel in &self.kernel_spectra {
            for ((dst, x), h) in scratch.iter_mut().zip(&spectrum).zip(kernel) {
                *dst = x * h;
            }
            self.inverse.process(&mut scratch);
            out.push(scratch.iter().map(|c| c.norm() * inv_n).collect());
        }
        Ok(out)
    }

    pub fn transform(&self, window: &SignalWindow) -> Result<TransformedWindow> {
        Ok(TransformedWindow {
            window_index: window.window_index,
            coefficients: self.magnitudes(&window.samples)?,
        })
    }
}

/// One-shot FFT transform. Prefer a reused [`CwtEngine`] for many windows.
pub fn cwt(window: &SignalWindow, plan: &ScalePlan) -> Result<TransformedWindow> {
    if window.samples.len() != plan.window_len {
        return Err(Error::LengthMismatch {
            expected: plan.window_len,
            actual: window.samples.len(),
        });
    }
    CwtEngine::new(plan.clone()).transform(window)
}

/// Reference transform by explicit circular convolution.
pub fn cwt_direct(window: &SignalWindow, plan: &ScalePlan) -> Result<TransformedWindow> {
    let n = plan.window_len;
    if window.samples.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: window.samples.len(),
        });
    }
    if n > DIRECT_MAX_LEN {
        return Err(Error::ScalePlan(format!(
            "direct transform limited to {DIRECT_MAX_LEN} samples, got {n}"
        )));
    }
    let x = demeaned(&window.samples);
    let coefficients = plan_kernels(plan)
        .iter()
        .map(|kernel| {
            (0..n)
                .map(|t| {
                    let mut acc = Complex::new(0.0, 0.0);
                    for (m, &xm) in x.iter().enumerate() {
                        acc += kernel[(t + n - m) % n] * xm;
                    }
                    acc.norm()
                })
                .collect()
        })
        .collect();
    Ok(TransformedWindow {
        window_index: window.window_index,
        coefficients,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn window(samples: Vec<f64>) -> SignalWindow {
        SignalWindow {
            subject_id: "s".into(),
            window_index: 1,
            day_offset: 0,
            samples,
        }
    }

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-12)
    }

    #[test]
    fn day_plan_endpoints() {
        let plan = plan_scales(1.0, 86_400, 8).unwrap();
        assert_eq!(plan.k(), 8);
        assert_eq!(plan.frequencies_hz[0], 0.25);
        let f_min = 4.0 / 86_400.0;
        assert!(rel_close(plan.frequencies_hz[7], f_min, 1e-12));
        let ratio = (f_min / 0.25f64).powf(1.0 / 7.0);
        for pair in plan.frequencies_hz.windows(2) {
            assert!(rel_close(pair[1] / pair[0], ratio, 1e-9));
        }
        assert!(rel_close(
            plan.frequencies_hz[0] / plan.frequencies_hz[7],
            0.25 / f_min,
            1e-9
        ));
        for (f, s) in plan.frequencies_hz.iter().zip(&plan.scales) {
            assert!(rel_close(*s, 6.0 / (2.0 * PI * f), 1e-12));
        }
    }

    #[test]
    fn short_window_rejected() {
        assert!(matches!(plan_scales(1.0, 8, 2), Err(Error::ScalePlan(_))));
        assert!(plan_scales(1.0, 64, 1).is_err());
        assert!(plan_scales(1.0, 3, 4).is_err());
    }

    #[test]
    fn kernel_has_unit_norm_and_hermitian_symmetry() {
        let k = morlet_kernel(7.3, 6.0, 128);
        let e: f64 = k.iter().map(|c| c.norm_sqr()).sum();
        assert!((e - 1.0).abs() < 1e-12);
        for i in 1..64 {
            assert!((k[i] - k[128 - i].conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_window_gives_zero() {
        let plan = plan_scales(1.0, 128, 4).unwrap();
        let w = window(vec![0.0; 128]);
        for tw in [cwt(&w, &plan).unwrap(), cwt_direct(&w, &plan).unwrap()] {
            assert!(tw.coefficients.iter().flatten().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn fft_matches_direct_on_random_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let plan = plan_scales(1.0, 256, 4).unwrap();
        let w = window((0..256).map(|_| rng.random_range(-1.0..1.0)).collect());
        let fast = cwt(&w, &plan).unwrap();
        let slow = cwt_direct(&w, &plan).unwrap();
        for (a, b) in fast.coefficients.iter().flatten().zip(slow.coefficients.iter().flatten()) {
            assert!(rel_close(*a, *b, 1e-6), "{a} vs {b}");
        }
    }

    #[test]
    fn impulse_returns_kernel_envelope() {
        let n = 256;
        let plan = plan_scales(1.0, n, 4).unwrap();
        let mut x = vec![0.0; n];
        x[n / 2] = 1.0;
        let tw = cwt_direct(&window(x), &plan).unwrap();
        for (k, &scale) in plan.scales.iter().enumerate() {
            let kernel = morlet_kernel(scale, 6.0, n);
            // Mean removal subtracts (1/n) * sum(kernel) everywhere.
            let leak: f64 = kernel.iter().sum::<Complex<f64>>().norm() / n as f64;
            for t in 0..n {
                let expect = kernel[(t + n - n / 2) % n].norm();
                assert!((tw.coefficients[k][t] - expect).abs() <= leak + 1e-12);
            }
        }
    }

    #[test]
    fn length_checks() {
        let plan = plan_scales(1.0, 64, 3).unwrap();
        assert!(matches!(cwt(&window(vec![0.0; 63]), &plan), Err(Error::LengthMismatch { .. })));
        assert!(cwt_direct(&window(vec![0.0; 65]), &plan).is_err());
        let big = plan_scales(1.0, 8192, 3).unwrap();
        assert!(cwt_direct(&window(vec![0.0; 8192]), &big).is_err());
    }

    #[test]
    fn homogeneous_and_shift_covariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 512;
        let plan = plan_scales(1.0, n, 5).unwrap();
        let engine = CwtEngine::new(plan);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let base = engine.magnitudes(&x).unwrap();

        let a = -3.7;
        let scaled = engine
            .magnitudes(&x.iter().map(|v| a * v).collect::<Vec<_>>())
            .unwrap();
        for (p, q) in base.iter().flatten().zip(scaled.iter().flatten()) {
            assert!(rel_close(*q, a.abs() * p, 1e-9));
        }

        let shift = 77;
        let mut rotated = x.clone();
        rotated.rotate_right(shift);
        let shifted = engine.magnitudes(&rotated).unwrap();
        for (b, s) in base.iter().zip(&shifted) {
            let mut expect = b.clone();
            expect.rotate_right(shift);
            for (p, q) in expect.iter().zip(s) {
                assert!(rel_close(*p, *q, 1e-6));
            }
        }
    }
}
