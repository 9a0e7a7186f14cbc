//! Equilibrium, transverse normal modes and amplitude/frequency-modulated
//! Mølmer–Sørensen pulses for long ion chains with uniform density.
//!
//! The crate is `no_std` with `alloc`. Everything here is a pure function of
//! its inputs; file formats, configuration and the command-line front end
//! live in the `ionchain` crate.
//!
//! Units are SI throughout: metres, seconds, kilograms, coulombs, and angular
//! frequencies in rad/s. Ion and mode indices are zero-based.
//!
//! Pipeline:
//!
//! 1. [`crystal`]: trap potential and equilibrium positions.
//! 2. [`modes`]: transverse coupling matrix, mode frequencies, Lamb-Dicke factors.
//! 3. [`pulse`]: amplitude shapes and the turning-point frequency pattern.
//! 4. [`trajectory`]: phase-space trajectories, entangling angle, motional error.
//! 5. [`optimizer`]: pattern search over the frequency pattern, power calibration.
//! 6. [`analysis`]: offset robustness sweeps, slope fits, all-pairs power maps.

#![no_std]
#![warn(missing_debug_implementations)]
// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod consts;
pub mod crystal;
mod error;
pub mod linalg;
pub mod modes;
pub mod optimizer;
pub mod pulse;
pub mod quad;
pub mod trajectory;

pub use crate::error::{Error, Result};
pub use num_complex::Complex64;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use crate::analysis::{PowerMap, RobustnessSweep, SlopeFit};
pub use crate::crystal::{AxialTrap, EquilibriumOptions, IonCrystal, TrapConfig};
pub use crate::modes::ModeData;
pub use crate::optimizer::{OptimizationOutcome, OptimizationProblem};
pub use crate::pulse::{AmplitudeShape, FourierDecomposition, PulseSchedule};
pub use crate::trajectory::{ErrorConvention, GateReport, TimeGrid, Trajectory};
