//! TOML run configuration. Frequencies are in Hz and mode/ion indices are
//! 1-based here; everything is converted to rad/s and 0-based on the way in.

use std::path::{Path, PathBuf};

use ionchain_core::consts::{counter_propagating_wavevector, hz_to_rad, YB171_MASS};
use ionchain_core::crystal::AxialTrap;
use ionchain_core::optimizer::REFERENCE_AMPLITUDE;
use ionchain_core::pulse::fm_points_from_hz;
use ionchain_core::trajectory::{ErrorConvention, TimeGrid};
use ionchain_core::{AmplitudeShape, EquilibriumOptions, ModeData, OptimizationProblem, PulseSchedule, TrapConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub trap: TrapSection,
    pub equilibrium: EquilibriumSection,
    pub pulse: PulseSection,
    pub optimize: OptimizeSection,
    pub trajectory: TrajectorySection,
    pub report: ReportSection,
    pub sweep: SweepSection,
    pub powermap: PowerMapSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSection {
    pub n_ions: usize,
    pub delta_z_m: f64,
    pub scale_r: f64,
    pub cutoff_s: f64,
    pub omega_x_hz: f64,
    pub ion_mass_kg: f64,
    pub raman_wavelength_m: f64,
    /// Replaces the uniform-density potential by a harmonic well.
    pub axial_frequency_hz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquilibriumSection {
    pub force_tolerance_n: f64,
    pub max_iterations: usize,
    pub initial_step_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    A,
    B,
    Flat,
}

/// `"a"`, `"b"`, `"flat"`, or an explicit table such as
/// `{ kind = "stepped", levels = [0.5, 1.0, 0.5], ramp_fraction = 0.1 }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShapeSpec {
    Named(ShapeName),
    Custom(AmplitudeShape),
}

impl ShapeSpec {
    pub fn shape(&self) -> AmplitudeShape {
        match self {
            ShapeSpec::Named(ShapeName::A) => AmplitudeShape::pulse_a(),
            ShapeSpec::Named(ShapeName::B) => AmplitudeShape::pulse_b(),
            ShapeSpec::Named(ShapeName::Flat) => AmplitudeShape::Flat,
            ShapeSpec::Custom(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PulseSection {
    pub shape: ShapeSpec,
    pub gate_time_s: f64,
    pub n_oscillations: usize,
    /// μ₀ = ω[reference_mode] + reference_offset_hz, modes ascending from 1.
    pub reference_mode: usize,
    pub reference_offset_hz: f64,
    /// Starting turning points; flat when absent.
    pub fm_points_hz: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeSection {
    pub pair: [usize; 2],
    /// Explicit target modes; otherwise the `n_targets` nearest μ₀.
    pub target_modes: Option<Vec<usize>>,
    pub n_targets: usize,
    pub max_evals: usize,
    pub restarts: usize,
    pub jitter_hz: f64,
    pub initial_step_hz: f64,
    pub min_step_hz: f64,
    pub reference_rabi_hz: f64,
    pub grid_intervals: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySection {
    pub grid_intervals: usize,
    pub convention: ErrorConvention,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    /// Modes whose trajectories are exported; the optimizer targets when absent.
    pub trajectory_modes: Option<Vec<usize>>,
    /// Rows per trajectory file (plus the endpoint).
    pub trajectory_points: usize,
    pub waveform_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub min_offset_hz: f64,
    pub max_offset_hz: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PairSelection {
    All,
    Subset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerMapSection {
    pub pairs: PairSelection,
    pub subset_size: usize,
    /// Ions at each end counted as "edge" in the summary.
    pub edge_ions: usize,
    /// Minimum |i − j| for the long-distance mean.
    pub long_distance: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            output_dir: PathBuf::from("out"),
            trap: TrapSection::default(),
            equilibrium: EquilibriumSection::default(),
            pulse: PulseSection::default(),
            optimize: OptimizeSection::default(),
            trajectory: TrajectorySection::default(),
            report: ReportSection::default(),
            sweep: SweepSection::default(),
            powermap: PowerMapSection::default(),
        }
    }
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection {
            n_ions: 50,
            delta_z_m: 3e-6,
            scale_r: 0.95,
            cutoff_s: 0.98,
            omega_x_hz: 3.07e6,
            ion_mass_kg: YB171_MASS,
            raman_wavelength_m: 355e-9,
            axial_frequency_hz: None,
        }
    }
}

impl Default for EquilibriumSection {
    fn default() -> Self {
        let o = EquilibriumOptions::default();
        EquilibriumSection {
            force_tolerance_n: o.force_tolerance,
            max_iterations: o.max_iterations,
            initial_step_m: o.initial_step,
        }
    }
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection {
            shape: ShapeSpec::Named(ShapeName::A),
            gate_time_s: 500e-6,
            n_oscillations: 8,
            reference_mode: 25,
            reference_offset_hz: -3.7e3,
            fm_points_hz: None,
        }
    }
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            pair: [25, 26],
            target_modes: None,
            n_targets: 10,
            max_evals: 20_000,
            restarts: 12,
            jitter_hz: 5e3,
            initial_step_hz: 500.0,
            min_step_hz: 0.01,
            reference_rabi_hz: REFERENCE_AMPLITUDE / (2.0 * std::f64::consts::PI),
            grid_intervals: 4_000,
        }
    }
}

impl Default for TrajectorySection {
    fn default() -> Self {
        TrajectorySection { grid_intervals: TimeGrid::default().intervals, convention: ErrorConvention::BothIons }
    }
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection { trajectory_modes: None, trajectory_points: 2000, waveform_points: 2000 }
    }
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection { min_offset_hz: 10.0, max_offset_hz: 2e3, points: 20 }
    }
}

impl Default for PowerMapSection {
    fn default() -> Self {
        PowerMapSection { pairs: PairSelection::All, subset_size: 50, edge_ions: 5, long_distance: 25 }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn zero_based(index: usize, n: usize, what: &str) -> Result<usize, CliError> {
    if index == 0 || index > n {
        return Err(invalid(format!("{what} {index} is outside 1..={n}")));
    }
    Ok(index - 1)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks everything that does not need the mode spectrum.
    pub fn validate(&self) -> Result<(), CliError> {
        self.trap_config()?;
        let n = self.trap.n_ions;
        zero_based(self.pulse.reference_mode, n, "reference_mode")?;
        self.pair()?;
        if let Some(targets) = &self.optimize.target_modes {
            if targets.is_empty() {
                return Err(invalid("target_modes must not be empty"));
            }
            for &k in targets {
                zero_based(k, n, "target mode")?;
            }
        } else if self.optimize.n_targets == 0 || self.optimize.n_targets > n {
            return Err(invalid(format!("n_targets must be in 1..={n}")));
        }
        if let Some(modes) = &self.report.trajectory_modes {
            for &k in modes {
                zero_based(k, n, "trajectory mode")?;
            }
        }
        if let Some(pts) = &self.pulse.fm_points_hz {
            if pts.len() != self.pulse.n_oscillations {
                return Err(invalid("fm_points_hz must hold n_oscillations values"));
            }
        }
        let s = &self.sweep;
        if !(s.min_offset_hz > 0.0 && s.max_offset_hz > s.min_offset_hz) || s.points < 2 {
            return Err(invalid("sweep needs 0 < min_offset_hz < max_offset_hz and at least 2 points"));
        }
        if self.report.trajectory_points == 0 || self.report.waveform_points < 2 {
            return Err(invalid("report needs trajectory_points >= 1 and waveform_points >= 2"));
        }
        if self.trajectory.grid_intervals < 2 || self.optimize.grid_intervals < 2 {
            return Err(invalid("grid_intervals must be at least 2"));
        }
        // the schedule itself, with a placeholder μ₀
        self.schedule_with_mu(0.0)?.validate()?;
        Ok(())
    }

    pub fn trap_config(&self) -> Result<TrapConfig, CliError> {
        let t = &self.trap;
        let mut cfg = TrapConfig::new(t.n_ions, t.delta_z_m, hz_to_rad(t.omega_x_hz));
        cfg.scale_r = t.scale_r;
        cfg.cutoff_s = t.cutoff_s;
        cfg.ion_mass = t.ion_mass_kg;
        cfg.raman_wavevector = counter_propagating_wavevector(t.raman_wavelength_m);
        if let Some(f) = t.axial_frequency_hz {
            cfg.axial = AxialTrap::Harmonic { omega_z: hz_to_rad(f) };
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn equilibrium_options(&self) -> EquilibriumOptions {
        let e = &self.equilibrium;
        EquilibriumOptions {
            force_tolerance: e.force_tolerance_n,
            max_iterations: e.max_iterations,
            initial_step: e.initial_step_m,
            ..EquilibriumOptions::default()
        }
    }

    /// Ion pair, 0-based.
    pub fn pair(&self) -> Result<(usize, usize), CliError> {
        let n = self.trap.n_ions;
        let [a, b] = self.optimize.pair;
        let (i, j) = (zero_based(a, n, "pair ion")?, zero_based(b, n, "pair ion")?);
        if i == j {
            return Err(invalid("pair must name two different ions"));
        }
        Ok((i, j))
    }

    pub fn mu_ref(&self, modes: &ModeData) -> Result<f64, CliError> {
        let k = zero_based(self.pulse.reference_mode, modes.len(), "reference_mode")?;
        Ok(modes.frequencies[k] + hz_to_rad(self.pulse.reference_offset_hz))
    }

    fn schedule_with_mu(&self, mu_ref: f64) -> Result<PulseSchedule, CliError> {
        let p = &self.pulse;
        let sched = PulseSchedule::new(
            p.shape.shape(),
            p.gate_time_s,
            hz_to_rad(self.optimize.reference_rabi_hz),
            mu_ref,
            p.n_oscillations,
        );
        Ok(match &p.fm_points_hz {
            Some(pts) => sched.with_fm_points(fm_points_from_hz(pts)),
            None => sched,
        })
    }

    /// Unoptimized schedule at the reference Rabi frequency.
    pub fn base_schedule(&self, modes: &ModeData) -> Result<PulseSchedule, CliError> {
        self.schedule_with_mu(self.mu_ref(modes)?)
    }

    /// Target modes, 0-based.
    pub fn target_modes(&self, modes: &ModeData) -> Result<Vec<usize>, CliError> {
        match &self.optimize.target_modes {
            Some(t) => t.iter().map(|&k| zero_based(k, modes.len(), "target mode")).collect(),
            None => Ok(modes.nearest_modes(self.mu_ref(modes)?, self.optimize.n_targets)),
        }
    }

    pub fn problem(&self, modes: &ModeData) -> Result<OptimizationProblem, CliError> {
        let o = &self.optimize;
        let mut p = OptimizationProblem::new(self.base_schedule(modes)?, self.target_modes(modes)?, self.pair()?);
        p.max_evals = o.max_evals;
        p.seed = self.seed;
        p.restarts = o.restarts;
        p.jitter = hz_to_rad(o.jitter_hz);
        p.initial_step = hz_to_rad(o.initial_step_hz);
        p.min_step = hz_to_rad(o.min_step_hz);
        p.reference_amp = hz_to_rad(o.reference_rabi_hz);
        p.convention = self.trajectory.convention;
        p.grid = TimeGrid::new(o.grid_intervals);
        p.validate(modes)?;
        Ok(p)
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.trajectory.grid_intervals)
    }

    /// Sweep offsets [rad/s].
    pub fn offsets(&self) -> Vec<f64> {
        let s = &self.sweep;
        ionchain_core::analysis::log_spaced(hz_to_rad(s.min_offset_hz), hz_to_rad(s.max_offset_hz), s.points)
    }
}
