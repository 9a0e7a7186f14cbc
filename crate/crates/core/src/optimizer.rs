//! Pattern search over the frequency-modulation turning points, and drive
//! power calibration for a maximally entangling gate.
//!
//! The cost is the summed squared time-averaged displacement of the target
//! modes. A closed trajectory with zero mean also has its endpoint pinned to
//! first order in a static detuning error, which is where the robustness of
//! the optimized pulses comes from.

use alloc::vec::Vec;
use core::f64::consts::PI;

// float methods come from libm under no_std
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::modes::ModeData;
use crate::pulse::{PulseSchedule, FM_BOUND};
use crate::quad::simpson_weights;
use crate::trajectory::{beta_from_responses, ErrorConvention, SampledPulse, TimeGrid, TARGET_BETA};
use crate::{Complex64, Error, Result};

/// Rabi frequency at which the cost is evaluated [rad/s].
pub const REFERENCE_AMPLITUDE: f64 = 2.0 * PI * 100e3;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationProblem {
    /// Shape, gate time and μ₀; its `fm_points` are the starting point.
    pub base_schedule: PulseSchedule,
    pub target_modes: Vec<usize>,
    pub ion_pair: (usize, usize),
    /// Objective evaluations allowed per start.
    pub max_evals: usize,
    pub seed: u64,
    /// Extra jittered starts after the one from `base_schedule`.
    pub restarts: usize,
    /// Half-width of the uniform jitter added to the starting point of each
    /// restart [rad/s].
    pub jitter: f64,
    /// First polling step [rad/s].
    pub initial_step: f64,
    /// Polling stops once the step falls below this [rad/s].
    pub min_step: f64,
    /// Box constraint on every turning point [rad/s].
    pub fm_bound: f64,
    /// Amplitude used while optimizing [rad/s].
    pub reference_amp: f64,
    pub convention: ErrorConvention,
    /// Quadrature grid for the cost. Coarser than the default gate grid; the
    /// cost only has to rank candidates.
    pub grid: TimeGrid,
}

impl OptimizationProblem {
    /// Problem with the default search settings.
    pub fn new(base_schedule: PulseSchedule, target_modes: Vec<usize>, ion_pair: (usize, usize)) -> Self {
        OptimizationProblem {
            base_schedule,
            target_modes,
            ion_pair,
            max_evals: 20_000,
            seed: 0,
            restarts: 12,
            jitter: 2.0 * PI * 5e3,
            initial_step: 2.0 * PI * 500.0,
            min_step: 2.0 * PI * 0.01,
            fm_bound: FM_BOUND,
            reference_amp: REFERENCE_AMPLITUDE,
            convention: ErrorConvention::BothIons,
            grid: TimeGrid::new(4_000),
        }
    }

    /// Targets the `count` modes nearest μ₀.
    pub fn nearest(base_schedule: PulseSchedule, modes: &ModeData, count: usize, ion_pair: (usize, usize)) -> Self {
        let targets = modes.nearest_modes(base_schedule.mu_ref, count);
        OptimizationProblem::new(base_schedule, targets, ion_pair)
    }

    pub fn validate(&self, modes: &ModeData) -> Result<()> {
        self.base_schedule.validate()?;
        let n = modes.len();
        if self.target_modes.is_empty() {
            return Err(Error::InvalidConfig("target_modes must not be empty"));
        }
        for &k in &self.target_modes {
            if k >= n {
                return Err(Error::IndexOutOfBounds { index: k, len: n });
            }
        }
        let (i, j) = self.ion_pair;
        for idx in [i, j] {
            if idx >= n {
                return Err(Error::IndexOutOfBounds { index: idx, len: n });
            }
        }
        if !(self.initial_step > 0.0) || !(self.min_step > 0.0) || self.min_step > self.initial_step {
            return Err(Error::InvalidConfig("need 0 < min_step <= initial_step"));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::InvalidConfig("jitter must be non-negative"));
        }
        if !(self.fm_bound > 0.0) || self.fm_bound > FM_BOUND {
            return Err(Error::InvalidConfig("fm_bound must be in (0, 2π×10 kHz]"));
        }
        if !(self.reference_amp >= 0.0) {
            return Err(Error::InvalidConfig("reference_amp must be non-negative"));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidConfig("max_evals must be positive"));
        }
        Ok(())
    }
}

/// Cost evaluator.
///
/// Uses `⟨α⟩ = (1/τ)∫₀^τ (τ − t) Ω(t) e^{iθ(t)} dt` as a single weighted sum,
/// and the fact that the modulation phase is linear in the turning points:
/// per-mode carriers `e^{i(μ₀ − ω_k)t}` and one phase basis function per
/// turning point are sampled once.
#[derive(Debug)]
struct Objective<'a> {
    problem: &'a OptimizationProblem,
    /// Simpson weight × Ω(t) × (τ − t)/τ.
    weights: Vec<f64>,
    /// Per target mode: (η weight, carrier samples).
    carriers: Vec<(f64, Vec<Complex64>)>,
    basis: Vec<Vec<f64>>,
    phase: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(problem: &'a OptimizationProblem, modes: &ModeData) -> Self {
        let sched = problem.base_schedule.clone().with_amp_scale(problem.reference_amp);
        let d = sched.n_oscillations;
        let mut pulse = SampledPulse::new(&sched.clone().with_fm_points(alloc::vec![0.0; d]), problem.grid);
        let tau = pulse.gate_time;
        let weights = simpson_weights(pulse.len(), pulse.step)
            .into_iter()
            .zip(&pulse.amplitude)
            .zip(&pulse.times)
            .map(|((w, a), t)| w * a * (tau - t) / tau)
            .collect();
        let basis = (0..d)
            .map(|k| {
                let mut unit = alloc::vec![0.0; d];
                unit[k] = 1.0;
                pulse.resample_fm(&sched.clone().with_fm_points(unit));
                core::mem::take(&mut pulse.fm_phase)
            })
            .collect();
        let (i, j) = problem.ion_pair;
        let carriers = problem
            .target_modes
            .iter()
            .map(|&k| {
                let detuning = sched.mu_ref - modes.frequencies[k];
                let c = pulse.times.iter().map(|t| Complex64::from_polar(1.0, detuning * t)).collect();
                (problem.convention.weight(modes, i, j, k), c)
            })
            .collect();
        let phase = alloc::vec![0.0; pulse.len()];
        Objective { problem, weights, carriers, basis, phase }
    }

    fn eval(&mut self, fm_points: &[f64]) -> f64 {
        self.phase.iter_mut().for_each(|p| *p = 0.0);
        for (x, b) in fm_points.iter().zip(&self.basis) {
            if *x != 0.0 {
                self.phase.iter_mut().zip(b).for_each(|(p, v)| *p += x * v);
            }
        }
        let drive: Vec<Complex64> =
            self.phase.iter().zip(&self.weights).map(|(p, w)| Complex64::from_polar(*w, *p)).collect();
        self.carriers
            .iter()
            .map(|(weight, c)| {
                let mean: Complex64 = c.iter().zip(&drive).map(|(a, b)| a * b).sum();
                weight * mean.norm_sqr()
            })
            .sum()
    }
}

/// Σ_target Σ_ion |⟨α_k⟩|² at the reference amplitude for the given turning
/// points.
pub fn cost(problem: &OptimizationProblem, modes: &ModeData, fm_points: &[f64]) -> Result<f64> {
    problem.validate(modes)?;
    if fm_points.len() != problem.base_schedule.n_oscillations {
        return Err(Error::InvalidConfig("fm_points must hold n_oscillations values"));
    }
    Ok(Objective::new(problem, modes).eval(fm_points))
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimizationOutcome {
    /// Optimized schedule, still at the base amplitude.
    pub schedule: PulseSchedule,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Objective evaluations over all starts.
    pub evaluations: usize,
    /// Which start produced the result (0 is the unjittered one).
    pub best_start: usize,
    /// `(evaluation index, best cost so far)` each time the best improves,
    /// with starts laid end to end in start order.
    pub trace: Vec<(usize, f64)>,
    pub starts: Vec<StartResult>,
}

/// Result of one local search.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StartResult {
    pub start: usize,
    pub points: Vec<f64>,
    pub cost: f64,
    pub evaluations: usize,
    pub converged: bool,
    /// `(evaluation index within this start, cost)` at every improvement.
    pub trace: Vec<(usize, f64)>,
}

/// Hooke–Jeeves search from `start`. Exploratory coordinate polls at the
/// current step; a successful poll is followed by pattern moves along the
/// accumulated direction. A cycle that lowers the cost by less than 10⁻¹⁰
/// relative halves the step. Stops when the step drops below `min_step` or
/// after `max_evals` evaluations.
fn pattern_search(objective: &mut Objective<'_>, index: usize, start: &[f64]) -> StartResult {
    let p = objective.problem;
    let bound = p.fm_bound;
    let clamp = |x: f64| x.clamp(-bound, bound);
    let limit = p.max_evals;
    let mut evals = 0usize;
    let mut trace = Vec::new();
    let mut best_seen = f64::INFINITY;

    let mut eval = |x: &[f64], evals: &mut usize| {
        let c = objective.eval(x);
        *evals += 1;
        if c < best_seen {
            best_seen = c;
            trace.push((*evals, c));
        }
        c
    };

    // exploratory poll around `x`
    let explore =
        |x: &[f64], fx: f64, step: f64, evals: &mut usize, eval: &mut dyn FnMut(&[f64], &mut usize) -> f64| {
            let mut y = x.to_vec();
            let mut fy = fx;
            for d in 0..y.len() {
                let orig = y[d];
                let mut moved = false;
                for dir in [1.0, -1.0] {
                    let cand = clamp(orig + dir * step);
                    if cand == orig || *evals >= limit {
                        continue;
                    }
                    y[d] = cand;
                    let fc = eval(&y, evals);
                    if fc < fy {
                        fy = fc;
                        moved = true;
                        break;
                    }
                }
                if !moved {
                    y[d] = orig;
                }
            }
            (y, fy)
        };

    let mut base: Vec<f64> = start.iter().copied().map(clamp).collect();
    let mut base_cost = eval(&base, &mut evals);
    let mut step = p.initial_step;
    let converged = loop {
        if step < p.min_step {
            break true;
        }
        if evals >= limit {
            break false;
        }
        let cycle_start = base_cost;
        let (trial, trial_cost) = explore(&base, base_cost, step, &mut evals, &mut eval);
        if trial_cost < base_cost {
            let mut prev = core::mem::replace(&mut base, trial);
            base_cost = trial_cost;
            while evals < limit {
                let jump: Vec<f64> = base.iter().zip(&prev).map(|(b, q)| clamp(2.0 * b - q)).collect();
                let jump_cost = eval(&jump, &mut evals);
                let (probe, probe_cost) = explore(&jump, jump_cost, step, &mut evals, &mut eval);
                if probe_cost >= base_cost {
                    break;
                }
                prev = core::mem::replace(&mut base, probe);
                base_cost = probe_cost;
            }
        }
        if base_cost == 0.0 {
            break true;
        }
        if cycle_start - base_cost < 1e-10 * cycle_start {
            step *= 0.5;
        }
    };
    StartResult { start: index, points: base, cost: base_cost, evaluations: evals, converged, trace }
}

/// Starting points of every start: the base schedule's turning points, then
/// `restarts` copies with uniform jitter of ±`jitter` drawn from a ChaCha
/// stream seeded with `seed`, clamped to the box.
pub fn start_points(problem: &OptimizationProblem) -> Vec<Vec<f64>> {
    let base = &problem.base_schedule.fm_points;
    let mut rng = ChaCha8Rng::seed_from_u64(problem.seed);
    let mut out = alloc::vec![base.clone()];
    for _ in 0..problem.restarts {
        let bound = problem.fm_bound;
        out.push(base.iter().map(|&x| (x + problem.jitter * rng.gen_range(-1.0..=1.0)).clamp(-bound, bound)).collect());
    }
    out
}

/// Local search from one starting point; `index` only labels the result.
pub fn search_from(
    problem: &OptimizationProblem,
    modes: &ModeData,
    index: usize,
    start: &[f64],
) -> Result<StartResult> {
    problem.validate(modes)?;
    if start.len() != problem.base_schedule.n_oscillations {
        return Err(Error::InvalidConfig("fm_points must hold n_oscillations values"));
    }
    Ok(pattern_search(&mut Objective::new(problem, modes), index, start))
}

/// Picks the lowest-cost start (earliest on ties). Fails with
/// [`Error::BudgetExhausted`] if that start ran out of budget.
pub fn select_best(
    problem: &OptimizationProblem,
    initial_cost: f64,
    mut starts: Vec<StartResult>,
) -> Result<OptimizationOutcome> {
    starts.sort_by_key(|r| r.start);
    let best = starts
        .iter()
        .fold(None::<&StartResult>, |b, r| match b {
            Some(b) if b.cost <= r.cost => Some(b),
            _ => Some(r),
        })
        .ok_or(Error::InvalidConfig("no starts to select from"))?;
    let evaluations = starts.iter().map(|r| r.evaluations).sum();
    if !best.converged {
        return Err(Error::BudgetExhausted {
            evals: evaluations,
            best_cost: best.cost,
            best_points: best.points.clone(),
        });
    }
    let mut trace = Vec::new();
    let mut running = f64::INFINITY;
    let mut offset = 0;
    for r in &starts {
        for &(e, c) in &r.trace {
            if c < running {
                running = c;
                trace.push((offset + e, c));
            }
        }
        offset += r.evaluations;
    }
    Ok(OptimizationOutcome {
        schedule: problem.base_schedule.clone().with_fm_points(best.points.clone()),
        initial_cost,
        final_cost: best.cost,
        evaluations,
        best_start: best.start,
        trace,
        starts,
    })
}

/// Minimizes [`cost`] over the turning points from every start in
/// [`start_points`], one after another, and keeps the best. Each start gets
/// `max_evals` evaluations.
pub fn optimize(problem: &OptimizationProblem, modes: &ModeData) -> Result<OptimizationOutcome> {
    problem.validate(modes)?;
    let mut objective = Objective::new(problem, modes);
    let initial_cost = objective.eval(&problem.base_schedule.fm_points);
    let starts =
        start_points(problem).iter().enumerate().map(|(s, x0)| pattern_search(&mut objective, s, x0)).collect();
    select_best(problem, initial_cost, starts)
}

/// Ω_max that scales `beta_ref` (obtained at `amp_ref`) to π/4.
pub fn amplitude_for_beta(amp_ref: f64, beta_ref: f64, i: usize, j: usize) -> Result<f64> {
    if !(beta_ref.abs() >= 1e-12) {
        return Err(Error::DegeneratePair { ion_i: i, ion_j: j, beta: beta_ref });
    }
    Ok(amp_ref * (TARGET_BETA / beta_ref.abs()).sqrt())
}

/// Peak Rabi frequency giving |β_ij| = π/4, using β ∝ Ω².
pub fn calibrate_power(sched: &PulseSchedule, modes: &ModeData, i: usize, j: usize, grid: TimeGrid) -> Result<f64> {
    let n = modes.len();
    for idx in [i, j] {
        if idx >= n {
            return Err(Error::IndexOutOfBounds { index: idx, len: n });
        }
    }
    let pulse = SampledPulse::new(sched, grid);
    let beta = beta_from_responses(&pulse.responses(modes), modes, i, j);
    amplitude_for_beta(sched.amp_scale, beta, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consts::hz_to_rad;
    use crate::linalg::Matrix;
    use crate::pulse::AmplitudeShape;
    use crate::TrapConfig;

    fn toy() -> (OptimizationProblem, ModeData) {
        let w = hz_to_rad(3e6);
        let cfg = TrapConfig::new(2, 3e-6, w);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let vectors = Matrix::from_rows(&[alloc::vec![s, -s], alloc::vec![s, s]]).unwrap();
        let modes = ModeData::from_parts(alloc::vec![w - hz_to_rad(20e3), w], vectors, &cfg).unwrap();
        let sched = PulseSchedule::standard(AmplitudeShape::pulse_a(), 1.0, w - hz_to_rad(3e3));
        let mut p = OptimizationProblem::new(sched, alloc::vec![0, 1], (0, 1));
        p.restarts = 1;
        (p, modes)
    }

    #[test]
    fn zero_amplitude_costs_nothing() {
        let (mut p, m) = toy();
        p.reference_amp = 0.0;
        assert_eq!(cost(&p, &m, &[0.0; 8]).unwrap(), 0.0);
    }

    #[test]
    fn validation_catches_bad_indices() {
        let (mut p, m) = toy();
        p.target_modes = alloc::vec![2];
        assert!(matches!(cost(&p, &m, &[0.0; 8]), Err(Error::IndexOutOfBounds { index: 2, .. })));
        let (mut p, m) = toy();
        p.target_modes.clear();
        assert!(matches!(optimize(&p, &m), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn start_points_are_seeded_and_bounded() {
        let (mut p, _) = toy();
        p.restarts = 4;
        p.jitter = 10.0 * FM_BOUND;
        let a = start_points(&p);
        assert_eq!(a.len(), 5);
        assert!(a[0].iter().all(|&x| x == 0.0));
        assert!(a.iter().flatten().all(|x| x.abs() <= FM_BOUND));
        assert_eq!(a, start_points(&p));
        p.seed = 1;
        assert_ne!(a, start_points(&p));
    }

    #[test]
    fn optimize_lowers_cost_and_respects_box() {
        let (p, m) = toy();
        let out = optimize(&p, &m).unwrap();
        assert!(out.final_cost < 1e-3 * out.initial_cost);
        assert!(out.schedule.fm_amplitude() <= p.fm_bound);
        assert_eq!(out.starts.len(), 2);
        assert!(out.trace.windows(2).all(|w| w[0].0 < w[1].0 && w[1].1 < w[0].1));
        assert_eq!(out.trace.last().unwrap().1, out.final_cost);
    }

    #[test]
    fn small_budget_is_reported() {
        let (mut p, m) = toy();
        p.max_evals = 5;
        match optimize(&p, &m) {
            Err(Error::BudgetExhausted { evals, best_points, .. }) => {
                assert_eq!(evals, 10);
                assert_eq!(best_points.len(), 8);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_pair_is_flagged() {
        assert!(matches!(amplitude_for_beta(1.0, 1e-13, 3, 4), Err(Error::DegeneratePair { ion_i: 3, ion_j: 4, .. })));
        assert!(matches!(amplitude_for_beta(1.0, f64::NAN, 3, 4), Err(Error::DegeneratePair { .. })));
        let w = amplitude_for_beta(2.0, -TARGET_BETA / 4.0, 0, 1).unwrap();
        assert!((w - 4.0).abs() < 1e-15);
    }
}
