//! Amplitude envelopes and the frequency-modulation pattern of a gate.
//!
//! The drive frequency is `μ(t) = μ₀ + f(t)`, where `f` passes through
//! `2D − 1` turning points placed at equal intervals on `[0, τ]` and joined
//! by raised-cosine segments (zero slope at every turning point). The
//! pattern is mirror symmetric, so only the first `D` turning points are free.

use alloc::vec::Vec;
use core::f64::consts::PI;

// float methods come from libm under no_std
#[allow(unused_imports)]
use num_traits::Float;

use crate::consts::hz_to_rad;
use crate::quad::simpson_fn;
use crate::{Complex64, Error, Result};

/// Largest allowed |turning point| [rad/s].
pub const FM_BOUND: f64 = 2.0 * PI * 10e3;
/// Default number of Fourier harmonics.
pub const DEFAULT_HARMONICS: usize = 32;
/// Simpson panels for the Fourier and sideband integrals.
const FOURIER_INTERVALS: usize = 20_000;

/// Shape of the Rabi-frequency envelope, normalised to a peak of 1
/// (for `Stepped`, to its largest level).
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum AmplitudeShape {
    /// `sin(πt/τ)^exponent`.
    SinePower { exponent: f64 },
    /// Three plateaus joined by raised-cosine ramps, rising from and falling
    /// back to zero. Each of the four ramps lasts `ramp_fraction·τ`.
    Stepped { levels: [f64; 3], ramp_fraction: f64 },
    /// Constant envelope (square pulse).
    Flat,
}

impl AmplitudeShape {
    /// `sin(πt/τ)^1.5`.
    pub fn pulse_a() -> Self {
        AmplitudeShape::SinePower { exponent: 1.5 }
    }

    /// Plateaus at (0.55, 1, 0.55) of the peak with 15% ramps.
    pub fn pulse_b() -> Self {
        AmplitudeShape::Stepped { levels: [0.55, 1.0, 0.55], ramp_fraction: 0.15 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AmplitudeShape::SinePower { exponent } if !(exponent > 0.0) => {
                Err(Error::InvalidConfig("sine exponent must be positive"))
            }
            AmplitudeShape::Stepped { levels, ramp_fraction } => {
                if levels.iter().any(|l| !(*l >= 0.0)) {
                    return Err(Error::InvalidConfig("step levels must be non-negative"));
                }
                if levels[0] != levels[2] {
                    return Err(Error::InvalidConfig("outer step levels must match (time symmetry)"));
                }
                if !(ramp_fraction > 0.0 && ramp_fraction < 0.25) {
                    return Err(Error::InvalidConfig("ramp_fraction must lie in (0, 0.25)"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Envelope at `u ∈ [0, τ/2]` (the first half of the gate).
    fn half_envelope(&self, u: f64, tau: f64) -> f64 {
        match *self {
            AmplitudeShape::SinePower { exponent } => (PI * u / tau).sin().max(0.0).powf(exponent),
            AmplitudeShape::Stepped { levels, ramp_fraction } => {
                let ramp = ramp_fraction * tau;
                let plateau = (tau - 4.0 * ramp) / 3.0;
                let rise = |x: f64| 0.5 * (1.0 - (PI * x).cos());
                if u < ramp {
                    levels[0] * rise(u / ramp)
                } else if u < ramp + plateau {
                    levels[0]
                } else if u < 2.0 * ramp + plateau {
                    levels[0] + (levels[1] - levels[0]) * rise((u - ramp - plateau) / ramp)
                } else {
                    levels[1]
                }
            }
            AmplitudeShape::Flat => 1.0,
        }
    }
}

/// Folds `t` onto the first half of the gate.
#[inline]
fn fold(t: f64, tau: f64) -> f64 {
    if t <= 0.5 * tau {
        t
    } else {
        tau - t
    }
}

/// Amplitude and frequency program of one gate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PulseSchedule {
    /// Gate time τ [s].
    pub gate_time: f64,
    pub shape: AmplitudeShape,
    /// Peak Rabi frequency Ω_max [rad/s].
    pub amp_scale: f64,
    /// Reference drive frequency μ₀ [rad/s].
    pub mu_ref: f64,
    /// Free turning-point offsets from μ₀ [rad/s]; length equals `n_oscillations`.
    pub fm_points: Vec<f64>,
    pub n_oscillations: usize,
}

impl PulseSchedule {
    /// Schedule with a flat frequency pattern (`μ(t) = μ₀`).
    pub fn new(shape: AmplitudeShape, gate_time: f64, amp_scale: f64, mu_ref: f64, n_oscillations: usize) -> Self {
        PulseSchedule {
            gate_time,
            shape,
            amp_scale,
            mu_ref,
            fm_points: alloc::vec![0.0; n_oscillations],
            n_oscillations,
        }
    }

    /// 500 μs gate with eight oscillations.
    pub fn standard(shape: AmplitudeShape, amp_scale: f64, mu_ref: f64) -> Self {
        PulseSchedule::new(shape, 500e-6, amp_scale, mu_ref, 8)
    }

    pub fn with_fm_points(mut self, points: Vec<f64>) -> Self {
        self.fm_points = points;
        self
    }

    pub fn with_amp_scale(mut self, amp_scale: f64) -> Self {
        self.amp_scale = amp_scale;
        self
    }

    /// Copy with every drive frequency shifted by `offset` [rad/s].
    pub fn shifted(&self, offset: f64) -> Self {
        PulseSchedule { mu_ref: self.mu_ref + offset, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gate_time > 0.0) {
            return Err(Error::InvalidConfig("gate_time must be positive"));
        }
        if !(self.amp_scale >= 0.0) {
            return Err(Error::InvalidConfig("amp_scale must be non-negative"));
        }
        if self.n_oscillations < 1 {
            return Err(Error::InvalidConfig("n_oscillations must be at least 1"));
        }
        if self.fm_points.len() != self.n_oscillations {
            return Err(Error::InvalidConfig("fm_points must hold n_oscillations values"));
        }
        if self.fm_points.iter().any(|p| !(p.abs() <= FM_BOUND)) {
            return Err(Error::InvalidConfig("fm_points must stay within ±2π×10 kHz"));
        }
        self.shape.validate()
    }

    /// All `2D − 1` turning-point offsets, mirrored about the centre.
    pub fn turning_points(&self) -> Vec<f64> {
        let d = self.fm_points.len();
        let mut pts = self.fm_points.clone();
        pts.extend(self.fm_points.iter().rev().skip(1));
        debug_assert_eq!(pts.len(), 2 * d - 1);
        pts
    }

    /// Times of the turning points, evenly spaced on `[0, τ]`.
    pub fn turning_times(&self) -> Vec<f64> {
        let n = 2 * self.fm_points.len() - 1;
        if n == 1 {
            return alloc::vec![0.0];
        }
        (0..n).map(|i| self.gate_time * i as f64 / (n - 1) as f64).collect()
    }

    /// Largest |turning point| [rad/s].
    pub fn fm_amplitude(&self) -> f64 {
        self.fm_points.iter().fold(0.0, |m, p| m.max(p.abs()))
    }

    fn check_time(&self, t: f64) -> Result<f64> {
        let slack = 1e-12 * self.gate_time;
        if t < -slack || t > self.gate_time + slack || t.is_nan() {
            return Err(Error::OutOfRange { t, gate_time: self.gate_time });
        }
        Ok(t.clamp(0.0, self.gate_time))
    }

    /// Rabi frequency Ω(t) [rad/s].
    pub fn amplitude(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        Ok(self.amplitude_unchecked(t))
    }

    /// Drive frequency μ(t) [rad/s].
    pub fn drive_frequency(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        Ok(self.mu_ref + self.fm_offset_unchecked(t))
    }

    /// μ(t) − μ₀ [rad/s].
    pub fn fm_offset(&self, t: f64) -> Result<f64> {
        let t = self.check_time(t)?;
        Ok(self.fm_offset_unchecked(t))
    }

    #[inline]
    pub(crate) fn amplitude_unchecked(&self, t: f64) -> f64 {
        self.amp_scale * self.shape.half_envelope(fold(t, self.gate_time), self.gate_time)
    }

    pub(crate) fn fm_offset_unchecked(&self, t: f64) -> f64 {
        let pts = &self.fm_points;
        let d = pts.len();
        if d == 1 {
            return pts[0];
        }
        let segment = self.gate_time / (2 * d - 2) as f64;
        let mut x = fold(t, self.gate_time) / segment;
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 {
            x = nearest;
        }
        let i = (x.floor() as usize).min(d - 2);
        let frac = x - i as f64;
        pts[i] + (pts[i + 1] - pts[i]) * 0.5 * (1.0 - (PI * frac).cos())
    }

    /// Largest |dΩ/dt| [rad/s²] estimated by finite differences on `samples` intervals.
    pub fn max_amplitude_slope(&self, samples: usize) -> f64 {
        let h = self.gate_time / samples as f64;
        (0..samples)
            .map(|i| {
                let a = self.amplitude_unchecked(i as f64 * h);
                let b = self.amplitude_unchecked((i + 1) as f64 * h);
                ((b - a) / h).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Cosine series of the drive frequency, `μ(t) ≈ mean + Σ a_n cos(w_n t)`
/// with `w_n = 2πn/τ`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FourierDecomposition {
    /// Time average of μ(t) [rad/s].
    pub mean: f64,
    /// a_n [rad/s] for n = 1..=n_max.
    pub coefficients: Vec<f64>,
    /// w_n [rad/s].
    pub harmonics: Vec<f64>,
}

impl FourierDecomposition {
    pub fn reconstruct(&self, t: f64) -> f64 {
        self.mean + self.coefficients.iter().zip(&self.harmonics).map(|(a, w)| a * (w * t).cos()).sum::<f64>()
    }

    /// RMS of `μ − reconstruction` over `samples + 1` evenly spaced points,
    /// relative to the RMS of the modulation `μ − mean`. Zero for flat patterns.
    pub fn relative_rms_residual(&self, sched: &PulseSchedule, samples: usize) -> f64 {
        let h = sched.gate_time / samples as f64;
        let (mut res, mut sig) = (0.0, 0.0);
        for i in 0..=samples {
            let t = i as f64 * h;
            let mu = sched.mu_ref + sched.fm_offset_unchecked(t);
            res += (mu - self.reconstruct(t)).powi(2);
            sig += (mu - self.mean).powi(2);
        }
        if sig == 0.0 {
            0.0
        } else {
            (res / sig).sqrt()
        }
    }
}

/// Projects μ(t) onto `cos(w_n t)` for n = 1..=n_max.
pub fn fourier_decompose(sched: &PulseSchedule, n_max: usize) -> FourierDecomposition {
    let tau = sched.gate_time;
    let offset = |t: f64| sched.fm_offset_unchecked(t);
    let offset_mean = simpson_fn(offset, 0.0, tau, FOURIER_INTERVALS) / tau;
    let harmonics: Vec<f64> = (1..=n_max).map(|n| 2.0 * PI * n as f64 / tau).collect();
    let coefficients = harmonics
        .iter()
        .map(|&w| 2.0 / tau * simpson_fn(|t| (offset(t) - offset_mean) * (w * t).cos(), 0.0, tau, FOURIER_INTERVALS))
        .collect();
    FourierDecomposition { mean: sched.mu_ref + offset_mean, coefficients, harmonics }
}

/// Endpoint estimate from the first-order sideband expansion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierApprox {
    pub alpha: Complex64,
    /// `max|a_n|·τ` when it exceeds 0.3, the point where the expansion
    /// stops being trustworthy.
    pub breakdown: Option<f64>,
}

/// Approximates `α_k(τ)` by treating each Fourier component of the detuning
/// as a pair of weak sidebands around the mean detuning `δ₀`:
///
/// ```text
/// α ≈ η [ I(δ₀) + Σ a_n/(2 w_n) · (I(δ₀ + w_n) − I(δ₀ − w_n)) ],   I(ν) = ∫₀^τ Ω(t) e^{iνt} dt
/// ```
pub fn alpha_fourier_approx(sched: &PulseSchedule, eta: f64, omega_k: f64, n_max: usize) -> FourierApprox {
    let fd = fourier_decompose(sched, n_max);
    let tau = sched.gate_time;
    let delta0 = fd.mean - omega_k;
    let tone = |nu: f64| {
        simpson_fn(|t| Complex64::from_polar(sched.amplitude_unchecked(t), nu * t), 0.0, tau, FOURIER_INTERVALS)
    };
    let mut alpha = tone(delta0);
    for (&a, &w) in fd.coefficients.iter().zip(&fd.harmonics) {
        if a == 0.0 {
            continue;
        }
        alpha += (tone(delta0 + w) - tone(delta0 - w)) * (a / (2.0 * w));
    }
    let worst = fd.coefficients.iter().fold(0.0f64, |m, a| m.max(a.abs())) * tau;
    FourierApprox { alpha: alpha * eta, breakdown: (worst > 0.3).then_some(worst) }
}

/// Builds turning-point offsets from values given in Hz.
pub fn fm_points_from_hz(hz: &[f64]) -> Vec<f64> {
    hz.iter().map(|&f| hz_to_rad(f)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn sched(shape: AmplitudeShape) -> PulseSchedule {
        PulseSchedule::standard(shape, 1.0, 0.0)
    }

    #[test]
    fn sine_shape_peak_and_endpoints() {
        let s = sched(AmplitudeShape::pulse_a()).with_amp_scale(3.0);
        assert_eq!(s.amplitude(250e-6).unwrap(), 3.0);
        assert_eq!(s.amplitude(0.0).unwrap(), 0.0);
        assert!(s.amplitude(500e-6).unwrap().abs() < 1e-20);
    }

    #[test]
    fn stepped_shape_levels() {
        let s = sched(AmplitudeShape::pulse_b());
        assert_eq!(s.amplitude(0.0).unwrap(), 0.0);
        assert_eq!(s.amplitude(500e-6).unwrap(), 0.0);
        assert_eq!(s.amplitude(250e-6).unwrap(), 1.0);
        // middle of the first plateau
        let ramp = 0.15 * 500e-6;
        let plateau = (500e-6 - 4.0 * ramp) / 3.0;
        assert_eq!(s.amplitude(ramp + plateau / 2.0).unwrap(), 0.55);
    }

    #[test]
    fn out_of_range_times() {
        let s = sched(AmplitudeShape::pulse_a());
        assert!(matches!(s.amplitude(-1e-6), Err(Error::OutOfRange { .. })));
        assert!(matches!(s.drive_frequency(501e-6), Err(Error::OutOfRange { .. })));
        assert!(s.amplitude(f64::NAN).is_err());
    }

    #[test]
    fn turning_point_layout() {
        let s = sched(AmplitudeShape::pulse_a()).with_fm_points((1..=8).map(|i| i as f64).collect());
        let tp = s.turning_points();
        assert_eq!(tp.len(), 15);
        assert_eq!(tp, vec![1., 2., 3., 4., 5., 6., 7., 8., 7., 6., 5., 4., 3., 2., 1.]);
        for (t, p) in s.turning_times().iter().zip(&tp) {
            assert_eq!(s.fm_offset(*t).unwrap(), *p);
        }
    }

    #[test]
    fn flat_pattern_is_constant() {
        let s = sched(AmplitudeShape::pulse_a()).with_fm_points(vec![0.0; 8]);
        let s = PulseSchedule { mu_ref: 42.0, ..s };
        for i in 0..=100 {
            assert_eq!(s.drive_frequency(i as f64 * 5e-6).unwrap(), 42.0);
        }
    }

    #[test]
    fn single_oscillation_is_constant_offset() {
        let s = PulseSchedule::new(AmplitudeShape::Flat, 1e-3, 1.0, 5.0, 1).with_fm_points(vec![2.0]);
        assert_eq!(s.turning_points(), vec![2.0]);
        assert_eq!(s.drive_frequency(3e-4).unwrap(), 7.0);
    }

    #[test]
    fn validation() {
        let good = sched(AmplitudeShape::pulse_b());
        assert!(good.validate().is_ok());
        assert!(good.clone().with_fm_points(vec![0.0; 7]).validate().is_err());
        assert!(good.clone().with_fm_points(vec![FM_BOUND * 1.01; 8]).validate().is_err());
        assert!(good.clone().with_amp_scale(-1.0).validate().is_err());
        let lopsided = AmplitudeShape::Stepped { levels: [0.5, 1.0, 0.6], ramp_fraction: 0.1 };
        assert!(sched(lopsided).validate().is_err());
    }

    #[test]
    fn sine_is_smoother_than_steps() {
        let a = sched(AmplitudeShape::pulse_a()).max_amplitude_slope(100_000);
        let b = sched(AmplitudeShape::pulse_b()).max_amplitude_slope(100_000);
        assert!(a < b, "{a} vs {b}");
    }

    #[test]
    fn flat_pattern_has_no_harmonics() {
        let fd = fourier_decompose(&sched(AmplitudeShape::pulse_a()), 8);
        assert!(fd.coefficients.iter().all(|a| a.abs() < 1e-12));
        assert_eq!(fd.mean, 0.0);
    }
}
