//! The six commands. Each one loads its upstream artifacts from the output
//! directory (or, with `with_prereqs`, first runs the upstream commands),
//! computes, and commits all of its files plus a manifest in one step.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ionchain_core::analysis::{fit_slope, power_map, power_map_pairs, RobustnessSweep};
use ionchain_core::consts::rad_to_hz;
use ionchain_core::crystal::solve_equilibrium;
use ionchain_core::modes::compute_modes;
use ionchain_core::optimizer::{calibrate_power, cost, search_from, select_best, start_points};
use ionchain_core::trajectory::{gate_report, motional_error, Trajectory};
use ionchain_core::{IonCrystal, ModeData, PulseSchedule, TrapConfig};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{PairSelection, RunConfig};
use crate::error::CliError;
use crate::files::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, clap::ValueEnum)]
pub enum Command {
    Crystal,
    Modes,
    Optimize,
    Report,
    Sweep,
    Powermap,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Crystal => "crystal",
            Command::Modes => "modes",
            Command::Optimize => "optimize",
            Command::Report => "report",
            Command::Sweep => "sweep",
            Command::Powermap => "powermap",
        }
    }

    /// Upstream commands, in run order.
    pub fn prerequisites(self) -> &'static [Command] {
        use Command::*;
        match self {
            Crystal => &[],
            Modes => &[Crystal],
            Optimize => &[Crystal, Modes],
            Report | Sweep | Powermap => &[Crystal, Modes, Optimize],
        }
    }
}

/// Everything a command needs besides its inputs on disk.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: RunConfig,
    pub output_dir: PathBuf,
    pub with_prereqs: bool,
    /// Size of the worker pool, recorded in manifests.
    pub threads: usize,
    /// Print progress lines to stdout.
    pub verbose: bool,
}

pub type Summary = BTreeMap<String, Value>;

impl Context {
    pub fn new(config: RunConfig) -> Self {
        let output_dir = config.output_dir.clone();
        Context { config, output_dir, with_prereqs: false, threads: rayon::current_num_threads(), verbose: false }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn say(&self, line: impl AsRef<str>) {
        if self.verbose {
            println!("{}", line.as_ref());
        }
    }
}

/// Runs `command`, preceded by its prerequisites when `ctx.with_prereqs` is set.
pub fn run(command: Command, ctx: &Context) -> Result<Summary, CliError> {
    if ctx.with_prereqs {
        for &up in command.prerequisites() {
            run_one(up, ctx)?;
        }
    }
    run_one(command, ctx)
}

fn run_one(command: Command, ctx: &Context) -> Result<Summary, CliError> {
    let mut run = Run::new(command);
    match command {
        Command::Crystal => crystal(ctx, &mut run)?,
        Command::Modes => modes(ctx, &mut run)?,
        Command::Optimize => optimize(ctx, &mut run)?,
        Command::Report => report(ctx, &mut run)?,
        Command::Sweep => sweep(ctx, &mut run)?,
        Command::Powermap => powermap(ctx, &mut run)?,
    }
    run.finish(ctx)
}

/// Bookkeeping for one command: staged files, input digests, timings.
struct Run {
    command: Command,
    started: Instant,
    outputs: OutputSet,
    inputs: BTreeMap<String, String>,
    timings: BTreeMap<String, f64>,
    summary: Summary,
}

impl Run {
    fn new(command: Command) -> Self {
        Run {
            command,
            started: Instant::now(),
            outputs: OutputSet::new(),
            inputs: BTreeMap::new(),
            timings: BTreeMap::new(),
            summary: Summary::new(),
        }
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let t0 = Instant::now();
        let out = f();
        self.timings.insert(label.to_owned(), t0.elapsed().as_secs_f64());
        out
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_owned(), serde_json::to_value(value).expect("serializable"));
    }

    fn finish(mut self, ctx: &Context) -> Result<Summary, CliError> {
        self.timings.insert("total".to_owned(), self.started.elapsed().as_secs_f64());
        let config_text = ctx.config.to_toml();
        let manifest = Manifest {
            command: self.command.name().to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            core_version: ionchain_core::VERSION.to_owned(),
            seed: ctx.config.seed,
            threads: ctx.threads,
            config_sha256: sha256_hex(config_text.as_bytes()),
            config: ctx.config.clone(),
            inputs: self.inputs,
            outputs: self.outputs.digests(),
            timings_s: self.timings,
            summary: self.summary.clone(),
        };
        self.outputs.add_json(manifest_json(self.command.name()), &manifest);
        self.outputs.commit(&ctx.output_dir)?;
        Ok(self.summary)
    }
}

// ---- prerequisite loading ----

fn missing(ctx: &Context, name: &str, producer: Command) -> CliError {
    CliError::MissingPrerequisite {
        path: ctx.path(name),
        hint: format!("run `ionchain {}` with the same config first, or pass --with-prereqs", producer.name()),
    }
}

fn stale(ctx: &Context, name: &str, producer: Command, what: &str) -> CliError {
    CliError::MissingPrerequisite {
        path: ctx.path(name),
        hint: format!(
            "it was produced with a different {what}; rerun `ionchain {}` or pass --with-prereqs",
            producer.name()
        ),
    }
}

fn load<T: serde::de::DeserializeOwned>(
    ctx: &Context,
    run: &mut Run,
    name: &str,
    producer: Command,
) -> Result<T, CliError> {
    let path = ctx.path(name);
    let bytes = match std::fs::read(&path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(missing(ctx, name, producer)),
        Err(source) => return Err(CliError::Io { path, source }),
    };
    run.inputs.insert(name.to_owned(), sha256_hex(&bytes));
    serde_json::from_slice(&bytes).map_err(|e| CliError::Format { path, message: e.to_string() })
}

fn load_crystal(ctx: &Context, run: &mut Run) -> Result<IonCrystal, CliError> {
    let file: CrystalFile = load(ctx, run, CRYSTAL_JSON, Command::Crystal)?;
    if file.trap != ctx.config.trap {
        return Err(stale(ctx, CRYSTAL_JSON, Command::Crystal, "[trap] section"));
    }
    file.crystal()
}

fn load_modes(ctx: &Context, run: &mut Run) -> Result<(TrapConfig, ModeData), CliError> {
    let file: ModesFile = load(ctx, run, MODES_JSON, Command::Modes)?;
    if file.trap != ctx.config.trap {
        return Err(stale(ctx, MODES_JSON, Command::Modes, "[trap] section"));
    }
    let trap = ctx.config.trap_config()?;
    let modes = file.modes(&trap)?;
    Ok((trap, modes))
}

fn load_schedule(ctx: &Context, run: &mut Run, modes: &ModeData) -> Result<PulseSchedule, CliError> {
    let file: ScheduleFile = load(ctx, run, SCHEDULE_JSON, Command::Optimize)?;
    let cfg = &ctx.config;
    let expected = ScheduleFile::new(cfg, &cfg.base_schedule(modes)?);
    let same_mu = (file.mu_ref_hz - expected.mu_ref_hz).abs() <= 1e-9 * expected.mu_ref_hz.abs();
    if file.shape != expected.shape
        || file.gate_time_s != expected.gate_time_s
        || file.n_oscillations != expected.n_oscillations
        || file.pair != expected.pair
        || file.reference_mode != expected.reference_mode
        || file.reference_offset_hz != expected.reference_offset_hz
        || !same_mu
    {
        return Err(stale(ctx, SCHEDULE_JSON, Command::Optimize, "[pulse] section or pair"));
    }
    file.schedule()
}

fn hz(rad: f64) -> f64 {
    rad_to_hz(rad)
}

// ---- commands ----

fn crystal(ctx: &Context, run: &mut Run) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let trap = cfg.trap_config()?;
    let crystal = run.timed("equilibrium", || solve_equilibrium(&trap, &cfg.equilibrium_options()))?;
    let file = CrystalFile::new(&cfg.trap, &crystal);
    ctx.say(format!(
        "crystal: {} ions, mean spacing {:.4} um, spacing variation {:.2} %, {} iterations",
        crystal.len(),
        file.mean_spacing_m * 1e6,
        file.spacing_variation * 100.0,
        crystal.iterations
    ));
    run.note("mean_spacing_m", file.mean_spacing_m);
    run.note("spacing_variation", file.spacing_variation);
    run.note("residual_force_n", file.residual_force_n);
    run.outputs.add(CRYSTAL_CSV, crystal_csv(&crystal));
    run.outputs.add_json(CRYSTAL_JSON, &file);
    Ok(())
}

fn modes(ctx: &Context, run: &mut Run) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let crystal = load_crystal(ctx, run)?;
    let trap = cfg.trap_config()?;
    let modes = run.timed("modes", || compute_modes(&crystal, &trap))?;
    let file = ModesFile::new(&cfg.trap, &modes);
    let lo = file.frequencies_hz[0];
    let hi = *file.frequencies_hz.last().expect("non-empty chain");
    ctx.say(format!("modes: {} transverse modes, {:.6} MHz .. {:.6} MHz", modes.len(), lo / 1e6, hi / 1e6));
    run.note("lowest_hz", lo);
    run.note("highest_hz", hi);
    run.note("orthonormality_defect", modes.orthonormality_defect());
    run.outputs.add(SPECTRUM_CSV, spectrum_csv(&modes));
    run.outputs.add_json(MODES_JSON, &file);
    Ok(())
}

/// Waveform rows (t, Ω/2π, δμ/2π) at `points` evenly spaced times.
pub fn waveform(sched: &PulseSchedule, points: usize) -> Result<Vec<(f64, f64, f64)>, CliError> {
    let tau = sched.gate_time;
    (0..points)
        .map(|k| {
            let t = if k + 1 == points { tau } else { tau * k as f64 / (points - 1) as f64 };
            Ok((t, hz(sched.amplitude(t)?), hz(sched.fm_offset(t)?)))
        })
        .collect()
}

fn optimize(ctx: &Context, run: &mut Run) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let (_, modes) = load_modes(ctx, run)?;
    let problem = cfg.problem(&modes)?;
    let (i, j) = problem.ion_pair;
    let grid = cfg.grid();
    let conv = cfg.trajectory.convention;

    let base = &problem.base_schedule;
    let baseline = {
        let amp = calibrate_power(base, &modes, i, j, grid)?;
        motional_error(&base.clone().with_amp_scale(amp), &modes, i, j, conv, grid)?
    };
    let initial_cost = cost(&problem, &modes, &base.fm_points)?;
    let starts = start_points(&problem);
    let results = run.timed("search", || {
        starts.par_iter().enumerate().map(|(s, x0)| search_from(&problem, &modes, s, x0)).collect::<Result<Vec<_>, _>>()
    })?;
    let outcome = select_best(&problem, initial_cost, results)?;

    let amp = calibrate_power(&outcome.schedule, &modes, i, j, grid)?;
    let file = ScheduleFile::new(cfg, &outcome.schedule.clone().with_amp_scale(amp));
    let sched = file.schedule()?;
    let error = motional_error(&sched, &modes, i, j, conv, grid)?;
    ctx.say(format!(
        "optimize: cost {:.3e} -> {:.3e} in {} evaluations (start {}), error {:.3e} (flat {:.3e}), Rabi {:.2} kHz",
        outcome.initial_cost,
        outcome.final_cost,
        outcome.evaluations,
        outcome.best_start,
        error,
        baseline,
        file.rabi_max_hz / 1e3
    ));
    run.note("motional_error", error);
    run.note("baseline_error", baseline);
    run.note("initial_cost", outcome.initial_cost);
    run.note("final_cost", outcome.final_cost);
    run.note("evaluations", outcome.evaluations);
    run.note("best_start", outcome.best_start);
    run.note("target_modes", problem.target_modes.iter().map(|k| k + 1).collect::<Vec<_>>());
    run.note("rabi_max_hz", file.rabi_max_hz);
    run.note("fm_amplitude_hz", hz(sched.fm_amplitude()));
    run.outputs.add_json(SCHEDULE_JSON, &file);
    run.outputs.add(WAVEFORM_CSV, waveform_csv(&waveform(&sched, cfg.report.waveform_points)?));
    run.outputs.add(TRACE_CSV, trace_csv(&outcome.trace));
    Ok(())
}

/// Every `stride`-th sample plus the last, with `stride` chosen so at most
/// about `points` rows remain.
pub fn decimate(traj: &Trajectory, points: usize) -> Vec<(f64, ionchain_core::Complex64)> {
    let n = traj.samples.len();
    let stride = n.saturating_sub(1).div_ceil(points).max(1);
    let mut rows: Vec<_> = traj.samples.iter().step_by(stride).map(|s| (s.t, s.alpha)).collect();
    if !(n - 1).is_multiple_of(stride) {
        let last = traj.samples.last().expect("non-empty trajectory");
        rows.push((last.t, last.alpha));
    }
    rows
}

fn report(ctx: &Context, run: &mut Run) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let (_, modes) = load_modes(ctx, run)?;
    let sched = load_schedule(ctx, run, &modes)?;
    let (i, j) = cfg.pair()?;
    let conv = cfg.trajectory.convention;
    let rep = run.timed("gate", || gate_report(&sched, &modes, i, j, conv, cfg.grid()))?;
    let targets = cfg.target_modes(&modes)?;
    let exported = match &cfg.report.trajectory_modes {
        Some(m) => m.iter().map(|k| k - 1).collect(),
        None => targets.clone(),
    };
    let mut trajectory_files = Vec::new();
    for &k in &exported {
        let name = trajectory_csv(k + 1);
        run.outputs
            .add(name.clone(), trajectory_rows_csv(&decimate(&rep.trajectories[k], cfg.report.trajectory_points)));
        trajectory_files.push(name);
    }
    let rows = (0..modes.len())
        .map(|k| {
            let end = rep.trajectories[k].endpoint();
            ModeRow {
                mode: k + 1,
                frequency_hz: hz(modes.frequencies[k]),
                detuning_hz: hz(sched.mu_ref - modes.frequencies[k]),
                eta_i: modes.eta[(i, k)],
                eta_j: modes.eta[(j, k)],
                alpha_end_re: end.re,
                alpha_end_im: end.im,
                error: rep.mode_errors[k],
                targeted: targets.contains(&k),
            }
        })
        .collect();
    let file = ReportFile {
        pair: cfg.optimize.pair,
        convention: conv,
        beta_rad: rep.beta,
        motional_error: rep.motional_error,
        rabi_max_hz: hz(rep.omega_max),
        fm_amplitude_hz: hz(sched.fm_amplitude()),
        thermal_factor: "ground state; multiply each mode's term by 2n+1 for mean occupation n".to_owned(),
        modes: rows,
        trajectory_files,
    };
    ctx.say(format!(
        "report: beta {:.6} rad, error {:.3e}, Rabi {:.2} kHz",
        file.beta_rad,
        file.motional_error,
        file.rabi_max_hz / 1e3
    ));
    run.note("beta_rad", file.beta_rad);
    run.note("motional_error", file.motional_error);
    run.note("rabi_max_hz", file.rabi_max_hz);
    run.outputs.add_json(REPORT_JSON, &file);
    Ok(())
}

/// ℰ at each offset, evaluated in parallel.
pub fn parallel_sweep(ctx: &Context, sched: &PulseSchedule, modes: &ModeData) -> Result<RobustnessSweep, CliError> {
    let cfg = &ctx.config;
    let (i, j) = cfg.pair()?;
    let conv = cfg.trajectory.convention;
    let grid = cfg.grid();
    let offsets = cfg.offsets();
    let baseline = motional_error(sched, modes, i, j, conv, grid)?;
    let errors = offsets
        .par_iter()
        .map(|&d| motional_error(&sched.shifted(d), modes, i, j, conv, grid))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RobustnessSweep::from_errors(offsets, errors, baseline))
}

fn sweep(ctx: &Context, run: &mut Run) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let (_, modes) = load_modes(ctx, run)?;
    let sched = load_schedule(ctx, run, &modes)?;
    let result = run.timed("sweep", || parallel_sweep(ctx, &sched, &modes))?;
    let fit = fit_slope(&result.offsets, &result.errors, result.baseline).ok().map(|f| FitRecord {
        slope: f.slope,
        stderr: f.stderr,
        intercept: f.intercept,
        used: f.used,
    });
    let file = SweepFile {
        pair: cfg.optimize.pair,
        convention: cfg.trajectory.convention,
        baseline: result.baseline,
        offsets_hz: result.offsets.iter().map(|&d| hz(d)).collect(),
        errors: result.errors.clone(),
        fit_window: fit_window(),
        fit: fit.clone(),
    };
    match &fit {
        Some(f) => ctx.say(format!(
            "sweep: baseline {:.3e}, slope {:.3} +/- {:.3} from {} points",
            file.baseline,
            f.slope,
            f.stderr,
            f.used.len()
        )),
        None => ctx.say(format!("sweep: baseline {:.3e}, too few points in the fit window", file.baseline)),
    }
    run.note("baseline_error", file.baseline);
    run.note("slope", fit.as_ref().map(|f| f.slope));
    run.note("slope_stderr", fit.as_ref().map(|f| f.stderr));
    run.outputs.add(SWEEP_CSV, sweep_csv(&file));
    run.outputs.add_json(SWEEP_JSON, &file);
    Ok(())
}

/// `size` pairs spread evenly over the i < j enumeration.
pub fn subset_pairs(n: usize, size: usize) -> Vec<(usize, usize)> {
    let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    if size >= all.len() {
        return all;
    }
    (0..size).map(|k| all[k * all.len() / size]).collect()
}

fn powermap(ctx: &Context, run: &mut Run) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let crystal = load_crystal(ctx, run)?;
    let (_, modes) = load_modes(ctx, run)?;
    let sched = load_schedule(ctx, run, &modes)?;
    let grid = cfg.grid();
    let map = run.timed("powermap", || match cfg.powermap.pairs {
        PairSelection::All => power_map(&sched, &modes, grid),
        PairSelection::Subset => {
            power_map_pairs(&sched, &modes, &subset_pairs(modes.len(), cfg.powermap.subset_size), grid)
        }
    });
    let file = PowerMapFile::new(cfg, &map, &crystal);
    let s = &file.stats;
    let khz = |x: Option<f64>| x.map_or("n/a".to_owned(), |v| format!("{:.2}", v / 1e3));
    ctx.say(format!(
        "powermap: {} pairs, {} degenerate, {} .. {} kHz, distance correlation {}, edge {} kHz vs central {} kHz",
        s.pairs,
        s.degenerate,
        khz(s.min_hz),
        khz(s.max_hz),
        s.distance_correlation.map_or("n/a".to_owned(), |c| format!("{c:.3}")),
        khz(s.edge_mean_hz),
        khz(s.central_mean_hz),
    ));
    run.note("stats", s);
    run.outputs.add(POWERMAP_CSV, powermap_csv(&file));
    run.outputs.add_json(POWERMAP_JSON, &file);
    Ok(())
}

/// Loads the schedule written by `optimize` without staleness checks.
pub fn read_schedule(dir: &Path) -> Result<PulseSchedule, CliError> {
    read_json::<ScheduleFile>(&dir.join(SCHEDULE_JSON))?.schedule()
}
