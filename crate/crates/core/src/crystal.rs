//! Axial trap potential for a uniform-density chain and the equilibrium
//! positions of the ions in it.
//!
//! The potential that holds a continuous line charge of density q/Δz in
//! place over `|z| < L` is `V(z) = r·k·ρ₀·ln(L²/(L² − z²))`. It diverges at
//! the chain ends, so it is used only inside `|z| < s·L` and continued
//! linearly (constant field) outside, which keeps it C¹.

use alloc::vec::Vec;
use core::f64::consts::PI;

// float methods come from libm under no_std
#[allow(unused_imports)]
use num_traits::Float;

use crate::consts::{
    counter_propagating_wavevector, hz_to_rad, COULOMB_K, ELEMENTARY_CHARGE, RAMAN_WAVELENGTH, YB171_MASS,
};
use crate::{Error, Result};

/// Shape of the axial confinement.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "kind"))]
pub enum AxialTrap {
    /// Logarithmic potential that produces uniform ion density.
    UniformDensity,
    /// Plain harmonic well `½·m·ω_z²·z²` (test configurations).
    Harmonic { omega_z: f64 },
}

/// Physical constants and trap parameters shared by every stage.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrapConfig {
    pub n_ions: usize,
    /// Target mean spacing Δz [m].
    pub delta_z: f64,
    /// Strength scale `r` of the logarithmic potential.
    pub scale_r: f64,
    /// Fraction `s` of the half length where the logarithmic form is cut off.
    pub cutoff_s: f64,
    /// Transverse (common-mode) trap frequency [rad/s].
    pub omega_x: f64,
    pub ion_mass: f64,
    pub charge: f64,
    pub coulomb_k: f64,
    /// Effective Raman wavevector Δk [1/m].
    pub raman_wavevector: f64,
    pub axial: AxialTrap,
}

impl TrapConfig {
    /// ¹⁷¹Yb⁺ chain with uniform-density confinement and counter-propagating
    /// 355 nm Raman beams. `s` defaults to 0.98, `r` to 1.
    pub fn new(n_ions: usize, delta_z: f64, omega_x: f64) -> Self {
        TrapConfig {
            n_ions,
            delta_z,
            scale_r: 1.0,
            cutoff_s: 0.98,
            omega_x,
            ion_mass: YB171_MASS,
            charge: ELEMENTARY_CHARGE,
            coulomb_k: COULOMB_K,
            raman_wavevector: counter_propagating_wavevector(RAMAN_WAVELENGTH),
            axial: AxialTrap::UniformDensity,
        }
    }

    /// 50 ions, Δz = 3 μm, r = 0.95, ω_x = 2π × 3.07 MHz.
    pub fn fifty_ion_chain() -> Self {
        TrapConfig { scale_r: 0.95, ..TrapConfig::new(50, 3e-6, hz_to_rad(3.07e6)) }
    }

    /// Two ions in a harmonic axial well.
    pub fn harmonic(n_ions: usize, omega_z: f64, omega_x: f64) -> Self {
        let mut cfg = TrapConfig::new(n_ions, 1e-6, omega_x);
        cfg.axial = AxialTrap::Harmonic { omega_z };
        cfg.delta_z = cfg.harmonic_pair_spacing().unwrap_or(1e-6);
        cfg
    }

    /// Half length of the chain, `L = N·Δz/2`.
    pub fn half_length(&self) -> f64 {
        self.n_ions as f64 * self.delta_z / 2.0
    }

    /// Linear charge density ρ₀ = q/Δz.
    pub fn charge_density(&self) -> f64 {
        self.charge / self.delta_z
    }

    /// Edge of the logarithmic region, `s·L`, for the uniform trap.
    pub fn cutoff(&self) -> Option<f64> {
        match self.axial {
            AxialTrap::UniformDensity => Some(self.cutoff_s * self.half_length()),
            AxialTrap::Harmonic { .. } => None,
        }
    }

    /// Force-balance spacing of two ions in the harmonic well: d³ = 2kq²/(mω_z²).
    pub fn harmonic_pair_spacing(&self) -> Option<f64> {
        match self.axial {
            AxialTrap::Harmonic { omega_z } => {
                Some((2.0 * self.coulomb_k * self.charge * self.charge / (self.ion_mass * omega_z * omega_z)).cbrt())
            }
            AxialTrap::UniformDensity => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ions < 1 {
            return Err(Error::InvalidConfig("n_ions must be at least 1"));
        }
        if !(self.delta_z > 0.0) {
            return Err(Error::InvalidConfig("delta_z must be positive"));
        }
        if !(self.cutoff_s > 0.0 && self.cutoff_s < 1.0) {
            return Err(Error::InvalidConfig("cutoff_s must lie in (0, 1)"));
        }
        if !(0.5..=1.5).contains(&self.scale_r) {
            return Err(Error::InvalidConfig("scale_r must lie in [0.5, 1.5]"));
        }
        if !(self.omega_x > 0.0) {
            return Err(Error::InvalidConfig("omega_x must be positive"));
        }
        if !(self.ion_mass > 0.0 && self.charge > 0.0 && self.coulomb_k > 0.0) {
            return Err(Error::InvalidConfig("mass, charge and Coulomb constant must be positive"));
        }
        if !(self.raman_wavevector > 0.0) {
            return Err(Error::InvalidConfig("raman_wavevector must be positive"));
        }
        if let AxialTrap::Harmonic { omega_z } = self.axial {
            if !(omega_z > 0.0) {
                return Err(Error::InvalidConfig("harmonic omega_z must be positive"));
            }
        }
        Ok(())
    }

    /// Prefactor r·k·ρ₀ [V].
    fn log_prefactor(&self) -> f64 {
        self.scale_r * self.coulomb_k * self.charge_density()
    }
}

/// Axial trap potential [V] at `z`.
pub fn trap_potential(z: f64, cfg: &TrapConfig) -> f64 {
    match cfg.axial {
        AxialTrap::UniformDensity => {
            let l = cfg.half_length();
            let zc = cfg.cutoff_s * l;
            let a = z.abs();
            let pre = cfg.log_prefactor();
            let inside = |x: f64| {
                let u = x / l;
                -pre * (-(u * u)).ln_1p()
            };
            if a < zc {
                inside(a)
            } else {
                let wall = pre * 2.0 * zc / (l * l - zc * zc);
                inside(zc) + wall * (a - zc)
            }
        }
        AxialTrap::Harmonic { omega_z } => 0.5 * cfg.ion_mass * omega_z * omega_z * z * z / cfg.charge,
    }
}

/// Axial trap field [V/m] at `z`, `−dV/dz`.
pub fn trap_field(z: f64, cfg: &TrapConfig) -> f64 {
    match cfg.axial {
        AxialTrap::UniformDensity => {
            let l = cfg.half_length();
            let zc = cfg.cutoff_s * l;
            let zz = z.clamp(-zc, zc);
            -cfg.log_prefactor() * 2.0 * zz / (l * l - zz * zz)
        }
        AxialTrap::Harmonic { omega_z } => -cfg.ion_mass * omega_z * omega_z * z / cfg.charge,
    }
}

/// Field at the end of the chain from `N` charges at spacing Δz,
/// `Σ_{n=1}^{N} k·q/(n·Δz)²` [V/m].
pub fn edge_field(cfg: &TrapConfig) -> f64 {
    let kq = cfg.coulomb_k * cfg.charge;
    // summed small-to-large for accuracy
    (1..=cfg.n_ions)
        .rev()
        .map(|n| {
            let r = n as f64 * cfg.delta_z;
            kq / (r * r)
        })
        .sum()
}

/// Large-N limit of [`edge_field`], `π²/6 · k·q/Δz²`.
pub fn edge_field_asymptote(cfg: &TrapConfig) -> f64 {
    PI * PI / 6.0 * cfg.coulomb_k * cfg.charge / (cfg.delta_z * cfg.delta_z)
}

/// Energy barrier [J] of the trap within the cutoff, `q·(V(s·L) − V(0))`.
///
/// Infinite for the harmonic well.
pub fn trap_depth(cfg: &TrapConfig) -> f64 {
    match cfg.cutoff() {
        Some(zc) => cfg.charge * (trap_potential(zc, cfg) - trap_potential(0.0, cfg)),
        None => f64::INFINITY,
    }
}

/// Net axial force [N] on every ion (trap plus pairwise Coulomb).
pub fn net_forces(positions: &[f64], cfg: &TrapConfig) -> Vec<f64> {
    let kq2 = cfg.coulomb_k * cfg.charge * cfg.charge;
    let mut forces: Vec<f64> = positions.iter().map(|&z| cfg.charge * trap_field(z, cfg)).collect();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = positions[i] - positions[j];
            let f = kq2 / (d * d) * d.signum();
            forces[i] += f;
            forces[j] -= f;
        }
    }
    forces
}

/// Total electrostatic potential energy [J].
pub fn potential_energy(positions: &[f64], cfg: &TrapConfig) -> f64 {
    let kq2 = cfg.coulomb_k * cfg.charge * cfg.charge;
    let trap: f64 = positions.iter().map(|&z| cfg.charge * trap_potential(z, cfg)).sum();
    let mut coulomb = 0.0;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            coulomb += kq2 / (positions[i] - positions[j]).abs();
        }
    }
    trap + coulomb
}

/// `q·(V(b) − V(a))` [J], written to avoid cancellation for nearby points.
fn trap_energy_change(a: f64, b: f64, cfg: &TrapConfig) -> f64 {
    match cfg.axial {
        AxialTrap::UniformDensity => {
            let l = cfg.half_length();
            let zc = cfg.cutoff_s * l;
            if a.abs() < zc && b.abs() < zc {
                // ln((L² − a²)/(L² − b²)) = ln1p((b² − a²)/(L² − b²))
                let num = (b - a) * (b + a);
                cfg.charge * cfg.log_prefactor() * (num / (l * l - b * b)).ln_1p()
            } else {
                cfg.charge * (trap_potential(b, cfg) - trap_potential(a, cfg))
            }
        }
        AxialTrap::Harmonic { omega_z } => 0.5 * cfg.ion_mass * omega_z * omega_z * (b - a) * (b + a),
    }
}

/// `U(to) − U(from)` [J] for two configurations with the same ordering.
pub fn energy_change(from: &[f64], to: &[f64], cfg: &TrapConfig) -> f64 {
    let kq2 = cfg.coulomb_k * cfg.charge * cfg.charge;
    let mut delta: f64 = from.iter().zip(to).map(|(&a, &b)| trap_energy_change(a, b, cfg)).sum();
    for i in 0..from.len() {
        for j in i + 1..from.len() {
            let d0 = (from[j] - from[i]).abs();
            let d1 = (to[j] - to[i]).abs();
            // 1/d1 − 1/d0 with the gap change taken from the displacements
            let gap_change = (to[j] - from[j]) - (to[i] - from[i]);
            let sign = (from[j] - from[i]).signum();
            delta -= kq2 * sign * gap_change / (d0 * d1);
        }
    }
    delta
}

/// Settings for [`solve_equilibrium`].
#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumOptions {
    /// Spacing of the initial evenly spaced lattice; `None` means 0.95·Δz.
    pub init_spacing: Option<f64>,
    /// Convergence threshold on the largest per-ion force [N].
    pub force_tolerance: f64,
    pub max_iterations: usize,
    /// Displacement of the most-forced ion on the first step [m].
    pub initial_step: f64,
    /// Keep the energy after every accepted step.
    pub record_energy: bool,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            init_spacing: None,
            force_tolerance: 1e-20,
            max_iterations: 1_000_000,
            initial_step: 1e-9,
            record_energy: false,
        }
    }
}

/// Equilibrium axial positions of the chain.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IonCrystal {
    /// Sorted positions z_i [m].
    pub positions: Vec<f64>,
    /// Largest per-ion net force at exit [N].
    pub residual_force: f64,
    pub iterations: usize,
    /// Potential energy [J] after each accepted step (empty unless requested).
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub energy_trace: Vec<f64>,
}

impl IonCrystal {
    /// Wraps externally supplied positions; they must be strictly increasing.
    pub fn from_positions(positions: Vec<f64>, residual_force: f64, iterations: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidConfig("crystal has no ions"));
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidConfig("crystal positions must be strictly increasing"));
        }
        Ok(IonCrystal { positions, residual_force, iterations, energy_trace: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn mean_spacing(&self) -> f64 {
        let n = self.positions.len();
        if n < 2 {
            return 0.0;
        }
        (self.positions[n - 1] - self.positions[0]) / (n - 1) as f64
    }

    /// (max − min)/mean of the neighbour spacings.
    pub fn spacing_variation(&self) -> f64 {
        let s = self.spacings();
        if s.is_empty() {
            return 0.0;
        }
        let max = s.iter().copied().fold(f64::MIN, f64::max);
        let min = s.iter().copied().fold(f64::MAX, f64::min);
        (max - min) / self.mean_spacing()
    }

    /// Largest `|z_i + z_{N−1−i}|`.
    pub fn mirror_asymmetry(&self) -> f64 {
        let n = self.positions.len();
        (0..n).map(|i| (self.positions[i] + self.positions[n - 1 - i]).abs()).fold(0.0, f64::max)
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Relaxes an evenly spaced lattice to equilibrium by gradient descent.
///
/// Each step moves every ion along its net force, scaled so that the most
/// strongly pushed ion moves by the current step length. Steps that raise
/// the energy are rejected and halve the step; accepted steps grow it by 10%.
pub fn solve_equilibrium(cfg: &TrapConfig, opts: &EquilibriumOptions) -> Result<IonCrystal> {
    cfg.validate()?;
    let n = cfg.n_ions;
    let spacing = opts.init_spacing.unwrap_or(0.95 * cfg.delta_z);
    if !(spacing > 0.0) {
        return Err(Error::InvalidConfig("init_spacing must be positive"));
    }
    let center = (n as f64 - 1.0) / 2.0;
    let mut z: Vec<f64> = (0..n).map(|i| (i as f64 - center) * spacing).collect();
    let cutoff = cfg.cutoff();

    let mut energy = potential_energy(&z, cfg);
    let mut forces = net_forces(&z, cfg);
    let mut fmax = max_abs(&forces);
    let mut step = opts.initial_step;
    let mut trace = Vec::new();
    if opts.record_energy {
        trace.push(energy);
    }
    let mut trial = z.clone();

    let mut iterations = 0;
    while fmax >= opts.force_tolerance {
        if iterations >= opts.max_iterations || step < 1e-30 {
            return Err(Error::NonConvergence { iterations, residual_force: fmax });
        }
        iterations += 1;
        let scale = step / fmax;
        for ((t, &zi), &f) in trial.iter_mut().zip(&z).zip(&forces) {
            *t = zi + scale * f;
        }
        let ordered = trial.windows(2).all(|w| w[1] > w[0]);
        let change = if ordered { energy_change(&z, &trial, cfg) } else { f64::INFINITY };
        if change <= 0.0 {
            core::mem::swap(&mut z, &mut trial);
            energy += change;
            forces = net_forces(&z, cfg);
            fmax = max_abs(&forces);
            step *= 1.1;
            if opts.record_energy {
                trace.push(energy);
            }
            if let Some(zc) = cutoff {
                if let Some((ion, &position)) = z.iter().enumerate().find(|(_, x)| x.abs() >= zc) {
                    return Err(Error::IonEscape { ion, position });
                }
            }
        } else {
            step *= 0.5;
        }
    }

    Ok(IonCrystal { positions: z, residual_force: fmax, iterations, energy_trace: trace })
}
