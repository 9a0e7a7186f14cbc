//! Static-offset robustness sweeps, log-log slope fits and all-pairs power
//! maps.

use alloc::vec::Vec;

// float methods come from libm under no_std
#[allow(unused_imports)]
use num_traits::Float;

use crate::crystal::IonCrystal;
use crate::modes::ModeData;
use crate::optimizer::amplitude_for_beta;
use crate::pulse::PulseSchedule;
use crate::trajectory::{beta_from_responses, error_from_responses, ErrorConvention, SampledPulse, TimeGrid};
use crate::{Error, Result};

/// Points with `ℰ − ℰ₀` at or below this are treated as quadrature noise.
pub const FIT_FLOOR: f64 = 1e-12;
/// Points with `ℰ` above this are outside the small-displacement regime.
pub const FIT_CEILING: f64 = 1e-2;

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == 0 {
                        lo
                    } else if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Default sweep: 20 offsets over 2π×[10 Hz, 2 kHz].
pub fn default_offsets() -> Vec<f64> {
    let two_pi = 2.0 * core::f64::consts::PI;
    log_spaced(two_pi * 10.0, two_pi * 2e3, 20)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// Indices of the points inside the fit window.
    pub used: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RobustnessSweep {
    /// δ₁ [rad/s], ascending.
    pub offsets: Vec<f64>,
    /// ℰ(δ₁).
    pub errors: Vec<f64>,
    /// ℰ₀ = ℰ(0).
    pub baseline: f64,
    /// `None` when fewer than five points fall inside the fit window.
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
}

impl RobustnessSweep {
    /// Assembles a sweep and fits it.
    pub fn from_errors(offsets: Vec<f64>, errors: Vec<f64>, baseline: f64) -> Self {
        let fit = fit_slope(&offsets, &errors, baseline).ok();
        RobustnessSweep {
            fitted_slope: fit.as_ref().map(|f| f.slope),
            slope_stderr: fit.as_ref().map(|f| f.stderr),
            offsets,
            errors,
            baseline,
        }
    }

    pub fn fit(&self) -> Result<SlopeFit> {
        fit_slope(&self.offsets, &self.errors, self.baseline)
    }

    /// `ℰ − ℰ₀` per offset.
    pub fn excess(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e - self.baseline).collect()
    }
}

/// ℰ with every drive frequency shifted by each offset. The schedule is
/// evaluated at its own amplitude, so pass a calibrated one.
pub fn offset_sweep(
    sched: &PulseSchedule,
    modes: &ModeData,
    pair: (usize, usize),
    offsets: &[f64],
    convention: ErrorConvention,
    grid: TimeGrid,
) -> Result<RobustnessSweep> {
    let (i, j) = pair;
    let n = modes.len();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfBounds { index: idx, len: n });
        }
    }
    if offsets.iter().any(|d| !(*d > 0.0)) || offsets.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("offsets must be positive and ascending"));
    }
    let mut pulse = SampledPulse::new(sched, grid);
    let mut error_at = |offset: f64| {
        pulse.resample_fm(&sched.shifted(offset));
        error_from_responses(&pulse.responses(modes), modes, i, j, convention)
    };
    let baseline = error_at(0.0);
    let errors = offsets.iter().map(|&d| error_at(d)).collect();
    Ok(RobustnessSweep::from_errors(offsets.to_vec(), errors, baseline))
}

/// Least-squares line through `(ln δ₁, ln(ℰ − ℰ₀))` over the points with
/// `ℰ − ℰ₀ > 10⁻¹²` and `ℰ ≤ 10⁻²`.
pub fn fit_slope(offsets: &[f64], errors: &[f64], baseline: f64) -> Result<SlopeFit> {
    let used: Vec<usize> = offsets
        .iter()
        .zip(errors)
        .enumerate()
        .filter(|(_, (d, e))| **d > 0.0 && **e - baseline > FIT_FLOOR && **e <= FIT_CEILING)
        .map(|(k, _)| k)
        .collect();
    if used.len() < 5 {
        return Err(Error::InsufficientPoints { usable: used.len(), required: 5 });
    }
    let xs: Vec<f64> = used.iter().map(|&k| offsets[k].ln()).collect();
    let ys: Vec<f64> = used.iter().map(|&k| (errors[k] - baseline).ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (n - 2.0) / sxx).sqrt();
    Ok(SlopeFit { slope, stderr, intercept, used })
}

/// Pearson correlation coefficient; NaN if either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum PowerEntry {
    Diagonal,
    /// Not computed (pair outside a subset run).
    Skipped,
    /// |β| too small to calibrate.
    Degenerate {
        beta: f64,
    },
    /// Ω_max [rad/s].
    Power {
        omega_max: f64,
    },
}

impl PowerEntry {
    pub fn omega_max(&self) -> Option<f64> {
        match self {
            PowerEntry::Power { omega_max } => Some(*omega_max),
            _ => None,
        }
    }
}

/// Symmetric N×N map of calibrated peak Rabi frequencies.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerMap {
    pub n: usize,
    /// Row-major, `n × n`.
    pub entries: Vec<PowerEntry>,
}

impl PowerMap {
    pub fn get(&self, i: usize, j: usize) -> PowerEntry {
        self.entries[i * self.n + j]
    }

    /// `(i, j, Ω_max)` for every calibrated pair with `i < j`.
    pub fn calibrated(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i + 1..self.n {
                if let Some(w) = self.get(i, j).omega_max() {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// Number of unordered pairs flagged degenerate.
    pub fn degenerate_count(&self) -> usize {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| matches!(self.get(i, j), PowerEntry::Degenerate { .. }))
            .count()
    }

    /// Smallest and largest calibrated Ω_max.
    pub fn range(&self) -> Option<(f64, f64)> {
        let c = self.calibrated();
        if c.is_empty() {
            return None;
        }
        Some(c.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, _, w)| (lo.min(w), hi.max(w))))
    }

    /// Correlation of Ω_max with the pair distance |z_i − z_j|.
    pub fn distance_correlation(&self, crystal: &IonCrystal) -> f64 {
        let c = self.calibrated();
        let d: Vec<f64> = c.iter().map(|&(i, j, _)| (crystal.positions[j] - crystal.positions[i]).abs()).collect();
        let w: Vec<f64> = c.iter().map(|&(_, _, w)| w).collect();
        pearson(&d, &w)
    }

    /// Mean Ω_max over pairs touching the outer `edge` ions at either end,
    /// and over the remaining pairs.
    pub fn edge_and_central_means(&self, edge: usize) -> (f64, f64) {
        let is_edge = |i: usize| i < edge || i + edge >= self.n;
        let (mut se, mut ne, mut sc, mut nc) = (0.0, 0usize, 0.0, 0usize);
        for (i, j, w) in self.calibrated() {
            if is_edge(i) || is_edge(j) {
                se += w;
                ne += 1;
            } else {
                sc += w;
                nc += 1;
            }
        }
        (se / ne as f64, sc / nc as f64)
    }

    /// Mean Ω_max over pairs with `|i − j| ≥ min_separation`.
    pub fn long_distance_mean(&self, min_separation: usize) -> f64 {
        let far: Vec<f64> =
            self.calibrated().into_iter().filter(|&(i, j, _)| j - i >= min_separation).map(|(_, _, w)| w).collect();
        far.iter().sum::<f64>() / far.len() as f64
    }
}

/// Calibrates every unordered pair. All pairs share the same per-mode
/// responses, so the map costs one gate simulation plus O(N³) arithmetic.
pub fn power_map(sched: &PulseSchedule, modes: &ModeData, grid: TimeGrid) -> PowerMap {
    let n = modes.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    power_map_pairs(sched, modes, &pairs, grid)
}

/// Like [`power_map`] but only for `pairs`; other off-diagonal entries are
/// [`PowerEntry::Skipped`]. Out-of-range or diagonal pairs are ignored.
pub fn power_map_pairs(sched: &PulseSchedule, modes: &ModeData, pairs: &[(usize, usize)], grid: TimeGrid) -> PowerMap {
    let n = modes.len();
    let mut entries = alloc::vec![PowerEntry::Skipped; n * n];
    for i in 0..n {
        entries[i * n + i] = PowerEntry::Diagonal;
    }
    let responses = SampledPulse::new(sched, grid).responses(modes);
    for &(i, j) in pairs {
        if i >= n || j >= n || i == j {
            continue;
        }
        let beta = beta_from_responses(&responses, modes, i, j);
        let entry = match amplitude_for_beta(sched.amp_scale, beta, i, j) {
            Ok(omega_max) => PowerEntry::Power { omega_max },
            Err(_) => PowerEntry::Degenerate { beta },
        };
        entries[i * n + j] = entry;
        entries[j * n + i] = entry;
    }
    PowerMap { n, entries }
}
