//! Phase-space trajectories of the driven modes, the entangling angle between
//! two ions, and the residual motional error at the end of the gate.
//!
//! For mode `k` driven through ion `i`:
//!
//! ```text
//! θ_k(t) = ∫₀^t (μ(t') − ω_k) dt'
//! α_k(t) = η_ik ∫₀^t Ω(t') e^{iθ_k(t')} dt'
//! β_ij   = 2 Σ_k η_ik η_jk ∫₀^τ dt₂ ∫₀^{t₂} dt₁ Ω(t₂)Ω(t₁) sin(θ_k(t₂) − θ_k(t₁))
//! ℰ      = Σ_k |α_k(τ)|²
//! ```
//!
//! All integrals use composite Simpson on one uniform grid. The inner integral
//! of β is exactly the running trajectory integral, so β costs one extra pass
//! over the samples instead of a double loop.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_4;

// float methods come from libm under no_std
#[allow(unused_imports)]
use num_traits::Float;

use crate::modes::ModeData;
use crate::pulse::PulseSchedule;
use crate::quad::{cumulative_simpson, simpson, simpson_fn, trapezoid};
use crate::{Complex64, Error, Result};

/// Uniform quadrature grid over the gate, as a number of Simpson panels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeGrid {
    pub intervals: usize,
}

impl TimeGrid {
    pub const fn new(intervals: usize) -> Self {
        TimeGrid { intervals }
    }

    /// Same grid with twice as many panels.
    pub const fn refined(self) -> Self {
        TimeGrid { intervals: 2 * self.intervals }
    }

    fn panels(self) -> usize {
        self.intervals.max(2).next_multiple_of(2)
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { intervals: 20_000 }
    }
}

/// Which addressed ions contribute to ℰ and to the optimizer cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ErrorConvention {
    /// Both ions of the pair drive every mode with their own η.
    #[default]
    BothIons,
    /// Only the first ion of the pair.
    SingleIon,
}

impl ErrorConvention {
    /// Weight `Σ_ion η_ion,k²` for mode `k`.
    pub fn weight(self, modes: &ModeData, i: usize, j: usize, k: usize) -> f64 {
        let ei = modes.eta[(i, k)];
        match self {
            ErrorConvention::BothIons => {
                let ej = modes.eta[(j, k)];
                ei * ei + ej * ej
            }
            ErrorConvention::SingleIon => ei * ei,
        }
    }
}

/// A schedule sampled on a [`TimeGrid`]: Ω(t_i) and the accumulated
/// frequency-modulation phase `∫₀^{t_i} (μ − μ₀)`.
///
/// Samples at `t_i` and `τ − t_i` are evaluated from the same folded time, so
/// the sampled envelope and modulation are exactly mirror symmetric.
#[derive(Clone, Debug)]
pub struct SampledPulse {
    pub step: f64,
    pub times: Vec<f64>,
    pub amplitude: Vec<f64>,
    pub fm_phase: Vec<f64>,
    pub mu_ref: f64,
    pub gate_time: f64,
}

/// Endpoint, time average and entangling kernel of one mode at unit η.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeResponse {
    /// `∫₀^τ Ω e^{iθ} dt`.
    pub endpoint: Complex64,
    /// `(1/τ) ∫₀^τ α(t) dt` at unit η.
    pub mean: Complex64,
    /// `∫₀^τ dt₂ ∫₀^{t₂} dt₁ Ω(t₂)Ω(t₁) sin(θ(t₂) − θ(t₁))`.
    pub beta_kernel: f64,
}

impl SampledPulse {
    pub fn new(sched: &PulseSchedule, grid: TimeGrid) -> Self {
        let n = grid.panels();
        let tau = sched.gate_time;
        let step = tau / n as f64;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 * step).collect();
        let folded = |i: usize| i.min(n - i) as f64 * step;
        let amplitude: Vec<f64> = (0..=n).map(|i| sched.amplitude_unchecked(folded(i))).collect();
        let mut pulse =
            SampledPulse { step, times, amplitude, fm_phase: Vec::new(), mu_ref: sched.mu_ref, gate_time: tau };
        pulse.resample_fm(sched);
        pulse
    }

    /// Replaces μ₀ and the modulation with those of `sched`, keeping Ω.
    /// `sched` must have the same gate time.
    pub fn resample_fm(&mut self, sched: &PulseSchedule) {
        let n = self.times.len() - 1;
        let offsets: Vec<f64> = (0..=n).map(|i| sched.fm_offset_unchecked(i.min(n - i) as f64 * self.step)).collect();
        self.fm_phase = cumulative_simpson(&offsets, self.step);
        self.mu_ref = sched.mu_ref;
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// θ_k at every grid node.
    pub fn phases(&self, omega_k: f64) -> Vec<f64> {
        let detuning = self.mu_ref - omega_k;
        self.times.iter().zip(&self.fm_phase).map(|(t, p)| detuning * t + p).collect()
    }

    /// Running integral `∫₀^{t_i} Ω e^{iθ_k}` (unit η) and the phases.
    pub fn unit_trajectory(&self, omega_k: f64) -> (Vec<Complex64>, Vec<f64>) {
        let phases = self.phases(omega_k);
        let integrand: Vec<Complex64> =
            self.amplitude.iter().zip(&phases).map(|(&a, &th)| Complex64::from_polar(a, th)).collect();
        (cumulative_simpson(&integrand, self.step), phases)
    }

    pub fn mode_response(&self, omega_k: f64) -> ModeResponse {
        let (alpha, phases) = self.unit_trajectory(omega_k);
        let endpoint = *alpha.last().expect("grid has samples");
        let mean = simpson(&alpha, self.step) / self.gate_time;
        // sin(θ₂ − θ₁) = Im(e^{iθ₂} e^{−iθ₁}); the t₁ integral is conj(α(t₂))
        let kernel: Vec<f64> = self
            .amplitude
            .iter()
            .zip(&phases)
            .zip(&alpha)
            .map(|((&a, &th), al)| a * (Complex64::from_polar(1.0, th) * al.conj()).im)
            .collect();
        ModeResponse { endpoint, mean, beta_kernel: simpson(&kernel, self.step) }
    }

    /// Responses of every mode in `modes`.
    pub fn responses(&self, modes: &ModeData) -> Vec<ModeResponse> {
        modes.frequencies.iter().map(|&w| self.mode_response(w)).collect()
    }
}

/// β_ij from precomputed responses.
pub fn beta_from_responses(responses: &[ModeResponse], modes: &ModeData, i: usize, j: usize) -> f64 {
    responses.iter().enumerate().map(|(k, r)| 2.0 * modes.eta[(i, k)] * modes.eta[(j, k)] * r.beta_kernel).sum()
}

/// ℰ from precomputed responses.
pub fn error_from_responses(
    responses: &[ModeResponse],
    modes: &ModeData,
    i: usize,
    j: usize,
    convention: ErrorConvention,
) -> f64 {
    responses.iter().enumerate().map(|(k, r)| convention.weight(modes, i, j, k) * r.endpoint.norm_sqr()).sum()
}

fn check_pair(modes: &ModeData, i: usize, j: usize) -> Result<()> {
    let n = modes.len();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfBounds { index: idx, len: n });
        }
    }
    Ok(())
}

/// θ_k(t) by composite Simpson over `[0, t]`, with panels in proportion to
/// `t/τ` out of `grid`.
pub fn accumulate_phase(sched: &PulseSchedule, omega_k: f64, t: f64, grid: TimeGrid) -> Result<f64> {
    sched.fm_offset(t)?;
    let t = t.clamp(0.0, sched.gate_time);
    if t == 0.0 {
        return Ok(0.0);
    }
    let panels = ((grid.panels() as f64 * t / sched.gate_time).ceil() as usize).max(2);
    let detuning = sched.mu_ref - omega_k;
    let fm = simpson_fn(|s| sched.fm_offset_unchecked(s), 0.0, t, panels);
    Ok(detuning * t + fm)
}

/// One point of a phase-space trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectorySample {
    pub t: f64,
    pub alpha: Complex64,
    /// θ_k(t) [rad].
    pub phase: f64,
}

/// α_k(t) over the whole gate.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    pub mode: usize,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    /// α_k(τ), the last sample.
    pub fn endpoint(&self) -> Complex64 {
        self.samples.last().map_or(Complex64::new(0.0, 0.0), |s| s.alpha)
    }
}

/// Integrates α_k(t) for mode `mode` (a label) at frequency `omega_k`.
pub fn integrate_alpha(sched: &PulseSchedule, mode: usize, eta: f64, omega_k: f64, grid: TimeGrid) -> Trajectory {
    let pulse = SampledPulse::new(sched, grid);
    trajectory_from(&pulse, mode, eta, omega_k)
}

fn trajectory_from(pulse: &SampledPulse, mode: usize, eta: f64, omega_k: f64) -> Trajectory {
    let (alpha, phases) = pulse.unit_trajectory(omega_k);
    let samples = pulse
        .times
        .iter()
        .zip(alpha)
        .zip(phases)
        .map(|((&t, a), phase)| TrajectorySample { t, alpha: a * eta, phase })
        .collect();
    Trajectory { mode, samples }
}

/// `(1/τ) ∫₀^τ α(t) dt` over the stored samples (Simpson when the sample
/// count allows it, trapezoid otherwise).
pub fn time_averaged_displacement(traj: &Trajectory) -> Complex64 {
    let n = traj.samples.len();
    if n < 2 {
        return traj.endpoint();
    }
    let span = traj.samples[n - 1].t - traj.samples[0].t;
    let h = span / (n - 1) as f64;
    let alpha: Vec<Complex64> = traj.samples.iter().map(|s| s.alpha).collect();
    let integral = if n >= 3 && n % 2 == 1 { simpson(&alpha, h) } else { trapezoid(&alpha, h) };
    integral / span
}

/// β_ij [rad] for ions `i` and `j`.
pub fn entangling_angle(sched: &PulseSchedule, modes: &ModeData, i: usize, j: usize, grid: TimeGrid) -> Result<f64> {
    check_pair(modes, i, j)?;
    let pulse = SampledPulse::new(sched, grid);
    Ok(beta_from_responses(&pulse.responses(modes), modes, i, j))
}

/// β_ij by direct nested quadrature of the double integral on a grid of
/// `points` panels (trapezoid in both variables). O(points²) per mode; kept
/// as an independent check on [`entangling_angle`].
pub fn entangling_angle_nested(
    sched: &PulseSchedule,
    modes: &ModeData,
    i: usize,
    j: usize,
    points: usize,
) -> Result<f64> {
    check_pair(modes, i, j)?;
    let pulse = SampledPulse::new(sched, TimeGrid::new(points));
    let mut beta = 0.0;
    let mut inner = Vec::with_capacity(pulse.len());
    let mut outer = Vec::with_capacity(pulse.len());
    for (k, &w) in modes.frequencies.iter().enumerate() {
        let coupling = 2.0 * modes.eta[(i, k)] * modes.eta[(j, k)];
        if coupling == 0.0 {
            continue;
        }
        let theta = pulse.phases(w);
        outer.clear();
        for m in 0..pulse.len() {
            inner.clear();
            inner.extend((0..=m).map(|l| pulse.amplitude[l] * (theta[m] - theta[l]).sin()));
            outer.push(pulse.amplitude[m] * trapezoid(&inner, pulse.step));
        }
        beta += coupling * trapezoid(&outer, pulse.step);
    }
    Ok(beta)
}

/// ℰ = Σ_k |α_k(τ)|² over all modes.
pub fn motional_error(
    sched: &PulseSchedule,
    modes: &ModeData,
    i: usize,
    j: usize,
    convention: ErrorConvention,
    grid: TimeGrid,
) -> Result<f64> {
    check_pair(modes, i, j)?;
    if sched.gate_time == 0.0 {
        return Ok(0.0);
    }
    let pulse = SampledPulse::new(sched, grid);
    Ok(error_from_responses(&pulse.responses(modes), modes, i, j, convention))
}

/// Everything known about a calibrated gate on one ion pair.
///
/// `motional_error` omits the thermal factor (2n̄ + 1); multiply it in for a
/// chain that is not in its motional ground state.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GateReport {
    pub pair: (usize, usize),
    /// β_ij at the calibrated amplitude [rad].
    pub beta: f64,
    pub motional_error: f64,
    pub convention: ErrorConvention,
    /// α_k(t) for every mode, driven through the first ion of the pair.
    pub trajectories: Vec<Trajectory>,
    /// Calibrated peak Rabi frequency [rad/s].
    pub omega_max: f64,
    /// Per-mode `(η_ik² + η_jk²)|α̃_k(τ)|²` contributions to ℰ.
    pub mode_errors: Vec<f64>,
}

/// Calibrates the schedule for β_ij = π/4 and evaluates it.
pub fn gate_report(
    sched: &PulseSchedule,
    modes: &ModeData,
    i: usize,
    j: usize,
    convention: ErrorConvention,
    grid: TimeGrid,
) -> Result<GateReport> {
    check_pair(modes, i, j)?;
    let reference = SampledPulse::new(sched, grid);
    let beta_ref = beta_from_responses(&reference.responses(modes), modes, i, j);
    let omega_max = crate::optimizer::amplitude_for_beta(sched.amp_scale, beta_ref, i, j)?;
    let calibrated = sched.clone().with_amp_scale(omega_max);
    let pulse = SampledPulse::new(&calibrated, grid);
    let responses = pulse.responses(modes);
    let mode_errors: Vec<f64> =
        responses.iter().enumerate().map(|(k, r)| convention.weight(modes, i, j, k) * r.endpoint.norm_sqr()).collect();
    let trajectories =
        modes.frequencies.iter().enumerate().map(|(k, &w)| trajectory_from(&pulse, k, modes.eta[(i, k)], w)).collect();
    Ok(GateReport {
        pair: (i, j),
        beta: beta_from_responses(&responses, modes, i, j),
        motional_error: mode_errors.iter().sum(),
        convention,
        trajectories,
        omega_max,
        mode_errors,
    })
}

/// Target entangling angle for a maximally entangling gate.
pub const TARGET_BETA: f64 = FRAC_PI_4;
