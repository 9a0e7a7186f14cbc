//! Physical constants (CODATA 2018) and default trap parameters.

use core::f64::consts::PI;

/// Coulomb constant 1/(4πε₀) [V·m/C].
pub const COULOMB_K: f64 = 8.987_551_792_3e9;
/// Elementary charge [C].
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced Planck constant [J·s].
pub const HBAR: f64 = 1.054_571_817e-34;
/// Mass of a ¹⁷¹Yb⁺ ion [kg].
pub const YB171_MASS: f64 = 2.838e-25;
/// Raman wavelength used for the default effective wavevector [m].
pub const RAMAN_WAVELENGTH: f64 = 355e-9;

/// Counter-propagating Raman beams: Δk = 2·(2π/λ).
pub fn counter_propagating_wavevector(wavelength: f64) -> f64 {
    2.0 * (2.0 * PI / wavelength)
}

/// Converts an ordinary frequency [Hz] to an angular frequency [rad/s].
#[inline]
pub fn hz_to_rad(hz: f64) -> f64 {
    2.0 * PI * hz
}

/// Converts an angular frequency [rad/s] to an ordinary frequency [Hz].
#[inline]
pub fn rad_to_hz(rad: f64) -> f64 {
    rad / (2.0 * PI)
}
