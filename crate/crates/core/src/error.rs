use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the solvers.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A configuration value violates its invariant.
    InvalidConfig(&'static str),
    /// Equilibrium descent hit its iteration cap.
    NonConvergence { iterations: usize, residual_force: f64 },
    /// An ion left the region |z| < s·L where the trap potential is valid.
    IonEscape { ion: usize, position: f64 },
    /// Two ions closer than 0.1 Δz; the crystal is not a valid equilibrium.
    DegenerateSpacing { ion_a: usize, ion_b: usize, distance: f64 },
    /// A transverse eigenvalue is not positive (zigzag instability).
    ImaginaryMode { mode: usize, eigenvalue: f64 },
    /// Evaluation time outside [0, τ].
    OutOfRange { t: f64, gate_time: f64 },
    /// The pair has (numerically) zero entangling angle at this detuning.
    DegeneratePair { ion_i: usize, ion_j: usize, beta: f64 },
    /// The optimizer ran out of evaluations before its stopping criterion.
    BudgetExhausted { evals: usize, best_cost: f64, best_points: alloc::vec::Vec<f64> },
    /// Too few usable points for a log-log fit.
    InsufficientPoints { usable: usize, required: usize },
    /// An ion or mode index is outside the chain.
    IndexOutOfBounds { index: usize, len: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::NonConvergence { iterations, residual_force } => {
                write!(f, "equilibrium did not converge after {iterations} iterations (max force {residual_force:e} N)")
            }
            Error::IonEscape { ion, position } => {
                write!(f, "ion {ion} escaped the trap at z = {position:e} m")
            }
            Error::DegenerateSpacing { ion_a, ion_b, distance } => {
                write!(f, "ions {ion_a} and {ion_b} are only {distance:e} m apart")
            }
            Error::ImaginaryMode { mode, eigenvalue } => {
                write!(f, "transverse mode {mode} is unstable (eigenvalue {eigenvalue:e} rad²/s²)")
            }
            Error::OutOfRange { t, gate_time } => {
                write!(f, "time {t:e} s is outside [0, {gate_time:e}] s")
            }
            Error::DegeneratePair { ion_i, ion_j, beta } => {
                write!(f, "ions {ion_i} and {ion_j} are uncoupled at this detuning (beta = {beta:e} rad)")
            }
            Error::BudgetExhausted { evals, best_cost, .. } => {
                write!(f, "optimizer budget of {evals} evaluations exhausted (best cost {best_cost:e})")
            }
            Error::InsufficientPoints { usable, required } => {
                write!(f, "slope fit needs {required} usable points, found {usable}")
            }
            Error::IndexOutOfBounds { index, len } => {
                write!(f, "index {index} out of bounds for length {len}")
            }
        }
    }
}

impl core::error::Error for Error {}
