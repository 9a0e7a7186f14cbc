//! Transverse normal modes of the chain around its equilibrium.
//!
//! Expanding the radial confinement and the Coulomb repulsion to second order
//! in the transverse displacements gives the coupling matrix
//!
//! ```text
//! A_ii = ω_x² − Σ_{j≠i} k·q²/(m·|z_i − z_j|³)
//! A_ij = k·q²/(m·|z_i − z_j|³)
//! ```
//!
//! whose eigenvalues are ω_k² and whose eigenvectors are the mode shapes.
//! Every row sums to ω_x², so the uniform (centre-of-mass) vector is always
//! an eigenvector at ω_x and it is the highest transverse mode.

use alloc::vec::Vec;

// float methods come from libm under no_std
#[allow(unused_imports)]
use num_traits::Float;

use crate::consts::HBAR;
use crate::crystal::{IonCrystal, TrapConfig};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::{Error, Result};

/// Mode frequencies, mode shapes and Lamb-Dicke factors.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModeData {
    /// ω_k [rad/s], ascending. The last entry is the centre-of-mass mode.
    pub frequencies: Vec<f64>,
    /// Row `k` is the unit mode vector u_k; entry `(k, i)` is u_ki.
    pub vectors: Matrix,
    /// Entry `(i, k)` is η_ik for ion `i` and mode `k`.
    pub eta: Matrix,
}

/// Lamb-Dicke factor `u·Δk·sqrt(ħ/(2·m·ω))`.
pub fn lamb_dicke_factor(participation: f64, omega: f64, cfg: &TrapConfig) -> f64 {
    participation * cfg.raman_wavevector * (HBAR / (2.0 * cfg.ion_mass * omega)).sqrt()
}

/// Transverse coupling matrix [rad²/s²] around the equilibrium `crystal`.
pub fn build_transverse_matrix(crystal: &IonCrystal, cfg: &TrapConfig) -> Result<Matrix> {
    let z = &crystal.positions;
    let n = z.len();
    let coupling = cfg.coulomb_k * cfg.charge * cfg.charge / cfg.ion_mass;
    let min_gap = 0.1 * cfg.delta_z;
    let mut a = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = (z[i] - z[j]).abs();
            if d < min_gap {
                return Err(Error::DegenerateSpacing { ion_a: i, ion_b: j, distance: d });
            }
            let c = coupling / (d * d * d);
            a[(i, j)] = c;
            a[(j, i)] = c;
        }
    }
    let wx2 = cfg.omega_x * cfg.omega_x;
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)]).sum();
        a[(i, i)] = wx2 - off;
    }
    Ok(a)
}

/// Diagonalizes the coupling matrix.
///
/// Each mode vector is oriented so its entries sum to a non-negative value;
/// when the sum vanishes (antisymmetric modes) the first non-negligible entry
/// is made positive.
pub fn solve_modes(matrix: &Matrix, cfg: &TrapConfig) -> Result<ModeData> {
    if !matrix.is_symmetric(0.0) {
        return Err(Error::InvalidConfig("coupling matrix must be symmetric"));
    }
    let eig = symmetric_eigen(matrix);
    if let Some((mode, &eigenvalue)) = eig.values.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::ImaginaryMode { mode, eigenvalue });
    }
    let n = matrix.rows();
    let mut vectors = eig.vectors;
    for k in 0..n {
        let row = vectors.row(k);
        let sum: f64 = row.iter().sum();
        let flip =
            if sum.abs() > 1e-9 { sum < 0.0 } else { row.iter().find(|x| x.abs() > 1e-9).is_some_and(|&x| x < 0.0) };
        if flip {
            for i in 0..n {
                vectors[(k, i)] = -vectors[(k, i)];
            }
        }
    }
    let frequencies: Vec<f64> = eig.values.iter().map(|v| v.sqrt()).collect();
    ModeData::from_parts(frequencies, vectors, cfg)
}

/// Equilibrium → coupling matrix → modes.
pub fn compute_modes(crystal: &IonCrystal, cfg: &TrapConfig) -> Result<ModeData> {
    solve_modes(&build_transverse_matrix(crystal, cfg)?, cfg)
}

impl ModeData {
    /// Assembles mode data from frequencies and vectors, deriving η.
    pub fn from_parts(frequencies: Vec<f64>, vectors: Matrix, cfg: &TrapConfig) -> Result<Self> {
        let n = frequencies.len();
        if vectors.rows() != n || vectors.cols() != n {
            return Err(Error::InvalidConfig("mode vectors must be an N×N matrix"));
        }
        if frequencies.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidConfig("mode frequencies must be positive"));
        }
        let eta = Matrix::from_fn(n, n, |i, k| lamb_dicke_factor(vectors[(k, i)], frequencies[k], cfg));
        Ok(ModeData { frequencies, vectors, eta })
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// η_ik for `ion` and `mode`.
    pub fn lamb_dicke(&self, ion: usize, mode: usize) -> Result<f64> {
        let n = self.len();
        if ion >= n {
            return Err(Error::IndexOutOfBounds { index: ion, len: n });
        }
        if mode >= n {
            return Err(Error::IndexOutOfBounds { index: mode, len: n });
        }
        Ok(self.eta[(ion, mode)])
    }

    pub fn vector(&self, mode: usize) -> &[f64] {
        self.vectors.row(mode)
    }

    /// Number of sign changes along the chain (entries below 1e-12 are skipped).
    pub fn sign_changes(&self, mode: usize) -> usize {
        let mut last = 0.0f64;
        let mut count = 0;
        for &x in self.vector(mode) {
            if x.abs() < 1e-12 {
                continue;
            }
            if last != 0.0 && x.signum() != last.signum() {
                count += 1;
            }
            last = x;
        }
        count
    }

    /// `min_i |u_ki| / max_i |u_ki|`; 1 for perfectly even participation.
    pub fn participation_ratio(&self, mode: usize) -> f64 {
        let v = self.vector(mode);
        let max = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let min = v.iter().fold(f64::MAX, |m, x| m.min(x.abs()));
        min / max
    }

    /// Mean gap to the neighbouring modes [rad/s].
    pub fn sideband_splitting(&self, mode: usize) -> f64 {
        let w = &self.frequencies;
        match (mode.checked_sub(1), w.get(mode + 1)) {
            (Some(lo), Some(hi)) => (hi - w[lo]) / 2.0,
            (None, Some(hi)) => hi - w[mode],
            (Some(lo), None) => w[mode] - w[lo],
            (None, None) => 0.0,
        }
    }

    /// The `count` modes closest in frequency to `omega`, in ascending index order.
    pub fn nearest_modes(&self, omega: f64, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| (self.frequencies[a] - omega).abs().total_cmp(&(self.frequencies[b] - omega).abs()));
        idx.truncate(count);
        idx.sort_unstable();
        idx
    }

    /// Largest |u_j·u_k − δ_jk| over all pairs.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.len();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in j..n {
                let dot: f64 = self.vector(j).iter().zip(self.vector(k)).map(|(a, b)| a * b).sum();
                let target = if j == k { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}
