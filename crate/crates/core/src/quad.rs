//! Composite Simpson quadrature on uniform grids, including the running
//! (cumulative) form used for phase and trajectory integrals.

use alloc::vec::Vec;
use core::ops::{Add, Mul, Sub};

/// Values that can be integrated: reals and complex numbers.
pub trait Integrand: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Default {}

impl<T> Integrand for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> + Default {}

/// Composite Simpson rule for samples `y` spaced by `h`.
///
/// `y.len()` must be odd and at least 3 (an even number of intervals).
pub fn simpson<T: Integrand>(y: &[T], h: f64) -> T {
    let n = y.len();
    assert!(n >= 3 && n % 2 == 1, "simpson needs an even number of intervals, got {} samples", n);
    let mut odd = T::default();
    let mut even = T::default();
    for (i, &v) in y.iter().enumerate().take(n - 1).skip(1) {
        if i % 2 == 1 {
            odd = odd + v;
        } else {
            even = even + v;
        }
    }
    (y[0] + y[n - 1] + odd * 4.0 + even * 2.0) * (h / 3.0)
}

/// Composite Simpson weights for `len` equally spaced samples (odd `len`).
pub fn simpson_weights(len: usize, h: f64) -> Vec<f64> {
    assert!(len >= 3 && len % 2 == 1, "simpson needs an even number of intervals, got {} samples", len);
    (0..len)
        .map(|i| {
            let w = if i == 0 || i == len - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * h / 3.0
        })
        .collect()
}

/// Integrates `f` over `[a, b]` with `intervals` Simpson panels (rounded up to even).
pub fn simpson_fn<T: Integrand>(mut f: impl FnMut(f64) -> T, a: f64, b: f64, intervals: usize) -> T {
    let n = intervals.max(2).next_multiple_of(2);
    let h = (b - a) / n as f64;
    let mut odd = T::default();
    let mut even = T::default();
    for i in 1..n {
        let v = f(a + i as f64 * h);
        if i % 2 == 1 {
            odd = odd + v;
        } else {
            even = even + v;
        }
    }
    (f(a) + f(b) + odd * 4.0 + even * 2.0) * (h / 3.0)
}

/// Running integral `I[i] = ∫_{x_0}^{x_i} y` on a uniform grid.
///
/// Even nodes carry the exact composite Simpson sums. Odd nodes add the
/// three-point partial-panel rule `h/12 (5y₀ + 8y₁ − y₂)` to the preceding
/// even node, which has the same local order. `y.len()` must be odd.
pub fn cumulative_simpson<T: Integrand>(y: &[T], h: f64) -> Vec<T> {
    let n = y.len();
    assert!(n % 2 == 1, "cumulative_simpson needs an even number of intervals");
    let mut out = Vec::with_capacity(n);
    out.push(T::default());
    let mut acc = T::default();
    let mut i = 0;
    while i + 2 < n {
        let (y0, y1, y2) = (y[i], y[i + 1], y[i + 2]);
        out.push(acc + (y0 * 5.0 + y1 * 8.0 - y2) * (h / 12.0));
        acc = acc + (y0 + y1 * 4.0 + y2) * (h / 3.0);
        out.push(acc);
        i += 2;
    }
    out
}

/// Trapezoid rule, used only by the independent nested-quadrature checks.
pub fn trapezoid<T: Integrand>(y: &[T], h: f64) -> T {
    match y.len() {
        0 | 1 => T::default(),
        n => {
            let inner = y[1..n - 1].iter().fold(T::default(), |a, &v| a + v);
            (inner + (y[0] + y[n - 1]) * 0.5) * h
        }
    }
}
