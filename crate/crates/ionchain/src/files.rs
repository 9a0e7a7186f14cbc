//! On-disk formats. Every JSON file here loads back into the struct that
//! wrote it, bit for bit; CSV files are plot data with a header row, `,`
//! separators and `.` decimals. Frequencies are in Hz, indices 1-based.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ionchain_core::analysis::{PowerEntry, FIT_CEILING, FIT_FLOOR};
use ionchain_core::consts::{hz_to_rad, rad_to_hz};
use ionchain_core::linalg::Matrix;
use ionchain_core::{
    AmplitudeShape, Complex64, ErrorConvention, IonCrystal, ModeData, PowerMap, PulseSchedule, TrapConfig,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{PairSelection, RunConfig, TrapSection};
use crate::error::CliError;

pub const CRYSTAL_CSV: &str = "crystal.csv";
pub const CRYSTAL_JSON: &str = "crystal.json";
pub const SPECTRUM_CSV: &str = "spectrum.csv";
pub const MODES_JSON: &str = "modes.json";
pub const SCHEDULE_JSON: &str = "schedule.json";
pub const WAVEFORM_CSV: &str = "waveform.csv";
pub const TRACE_CSV: &str = "trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_JSON: &str = "sweep.json";
pub const POWERMAP_CSV: &str = "powermap.csv";
pub const POWERMAP_JSON: &str = "powermap.json";

pub fn trajectory_csv(mode: usize) -> String {
    format!("trajectories/mode_{mode:02}.csv")
}

pub fn manifest_json(command: &str) -> String {
    format!("manifest-{command}.json")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalFile {
    pub trap: TrapSection,
    pub positions_m: Vec<f64>,
    pub residual_force_n: f64,
    pub iterations: usize,
    pub mean_spacing_m: f64,
    /// (max − min)/mean of the neighbour spacings.
    pub spacing_variation: f64,
}

impl CrystalFile {
    pub fn new(trap: &TrapSection, crystal: &IonCrystal) -> Self {
        CrystalFile {
            trap: trap.clone(),
            positions_m: crystal.positions.clone(),
            residual_force_n: crystal.residual_force,
            iterations: crystal.iterations,
            mean_spacing_m: crystal.mean_spacing(),
            spacing_variation: crystal.spacing_variation(),
        }
    }

    pub fn crystal(&self) -> Result<IonCrystal, CliError> {
        Ok(IonCrystal::from_positions(self.positions_m.clone(), self.residual_force_n, self.iterations)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesFile {
    pub trap: TrapSection,
    /// ω_k/2π, ascending; the last entry is the centre-of-mass mode.
    pub frequencies_hz: Vec<f64>,
    /// `vectors[k][i]` is the amplitude of ion i in mode k.
    pub vectors: Vec<Vec<f64>>,
    /// `lamb_dicke[i][k]` is η_ik. Recomputed from the vectors on load.
    pub lamb_dicke: Vec<Vec<f64>>,
}

impl ModesFile {
    pub fn new(trap: &TrapSection, modes: &ModeData) -> Self {
        let n = modes.len();
        ModesFile {
            trap: trap.clone(),
            frequencies_hz: modes.frequencies.iter().map(|&w| rad_to_hz(w)).collect(),
            vectors: (0..n).map(|k| modes.vector(k).to_vec()).collect(),
            lamb_dicke: (0..n).map(|i| (0..n).map(|k| modes.eta[(i, k)]).collect()).collect(),
        }
    }

    pub fn modes(&self, cfg: &TrapConfig) -> Result<ModeData, CliError> {
        let vectors =
            Matrix::from_rows(&self.vectors).ok_or(ionchain_core::Error::InvalidConfig("ragged mode vectors"))?;
        let freqs = self.frequencies_hz.iter().map(|&f| hz_to_rad(f)).collect();
        Ok(ModeData::from_parts(freqs, vectors, cfg)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub shape: AmplitudeShape,
    pub gate_time_s: f64,
    pub n_oscillations: usize,
    /// Calibrated peak Rabi frequency Ω_max/2π.
    pub rabi_max_hz: f64,
    /// μ₀/2π.
    pub mu_ref_hz: f64,
    /// Free turning points as offsets from μ₀; the pattern mirrors them.
    pub fm_points_hz: Vec<f64>,
    /// Ion pair the amplitude was calibrated for.
    pub pair: [usize; 2],
    pub reference_mode: usize,
    pub reference_offset_hz: f64,
}

impl ScheduleFile {
    pub fn new(cfg: &RunConfig, sched: &PulseSchedule) -> Self {
        ScheduleFile {
            shape: sched.shape.clone(),
            gate_time_s: sched.gate_time,
            n_oscillations: sched.n_oscillations,
            rabi_max_hz: rad_to_hz(sched.amp_scale),
            mu_ref_hz: rad_to_hz(sched.mu_ref),
            fm_points_hz: sched.fm_points.iter().map(|&w| rad_to_hz(w)).collect(),
            pair: cfg.optimize.pair,
            reference_mode: cfg.pulse.reference_mode,
            reference_offset_hz: cfg.pulse.reference_offset_hz,
        }
    }

    pub fn schedule(&self) -> Result<PulseSchedule, CliError> {
        let sched = PulseSchedule::new(
            self.shape.clone(),
            self.gate_time_s,
            hz_to_rad(self.rabi_max_hz),
            hz_to_rad(self.mu_ref_hz),
            self.n_oscillations,
        )
        .with_fm_points(self.fm_points_hz.iter().map(|&f| hz_to_rad(f)).collect());
        sched.validate()?;
        Ok(sched)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeRow {
    pub mode: usize,
    pub frequency_hz: f64,
    /// (μ₀ − ω_k)/2π.
    pub detuning_hz: f64,
    pub eta_i: f64,
    pub eta_j: f64,
    /// α_k(τ) for the first ion of the pair.
    pub alpha_end_re: f64,
    pub alpha_end_im: f64,
    /// This mode's share of the motional error.
    pub error: f64,
    pub targeted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub pair: [usize; 2],
    pub convention: ErrorConvention,
    pub beta_rad: f64,
    pub motional_error: f64,
    pub rabi_max_hz: f64,
    pub fm_amplitude_hz: f64,
    /// Ground-state value; a thermal mode with mean occupation n̄ scales its
    /// term by 2n̄ + 1.
    pub thermal_factor: String,
    pub modes: Vec<ModeRow>,
    pub trajectory_files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    /// 0-based indices of the offsets used in the fit.
    pub used: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub pair: [usize; 2],
    pub convention: ErrorConvention,
    pub baseline: f64,
    pub offsets_hz: Vec<f64>,
    pub errors: Vec<f64>,
    /// Points with excess in this window enter the log-log fit.
    pub fit_window: [f64; 2],
    pub fit: Option<FitRecord>,
}

impl SweepFile {
    pub fn excess(&self) -> Vec<f64> {
        self.errors.iter().map(|e| e - self.baseline).collect()
    }
}

pub fn fit_window() -> [f64; 2] {
    [FIT_FLOOR, FIT_CEILING]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRow {
    pub i: usize,
    pub j: usize,
    /// `None` when β is too small to calibrate.
    pub omega_max_hz: Option<f64>,
    pub beta_rad: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerStats {
    pub pairs: usize,
    pub calibrated: usize,
    pub degenerate: usize,
    pub min_hz: Option<f64>,
    pub max_hz: Option<f64>,
    /// Pearson correlation of Ω_max with |z_i − z_j|.
    pub distance_correlation: Option<f64>,
    pub edge_ions: usize,
    pub edge_mean_hz: Option<f64>,
    pub central_mean_hz: Option<f64>,
    pub long_distance: usize,
    pub long_distance_mean_hz: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerMapFile {
    pub n: usize,
    pub selection: PairSelection,
    /// Ion pairs i < j that were calibrated, 1-based.
    pub entries: Vec<PowerRow>,
    pub stats: PowerStats,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl PowerMapFile {
    pub fn new(cfg: &RunConfig, map: &PowerMap, crystal: &IonCrystal) -> Self {
        let n = map.n;
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (omega_max_hz, beta_rad) = match map.get(i, j) {
                    PowerEntry::Power { omega_max } => (Some(rad_to_hz(omega_max)), None),
                    PowerEntry::Degenerate { beta } => (None, Some(beta)),
                    PowerEntry::Diagonal | PowerEntry::Skipped => continue,
                };
                entries.push(PowerRow { i: i + 1, j: j + 1, omega_max_hz, beta_rad });
            }
        }
        let p = &cfg.powermap;
        let (edge, central) = map.edge_and_central_means(p.edge_ions);
        let range = map.range();
        let stats = PowerStats {
            pairs: entries.len(),
            calibrated: map.calibrated().len(),
            degenerate: map.degenerate_count(),
            min_hz: range.map(|r| rad_to_hz(r.0)),
            max_hz: range.map(|r| rad_to_hz(r.1)),
            distance_correlation: finite(map.distance_correlation(crystal)),
            edge_ions: p.edge_ions,
            edge_mean_hz: finite(rad_to_hz(edge)),
            central_mean_hz: finite(rad_to_hz(central)),
            long_distance: p.long_distance,
            long_distance_mean_hz: finite(rad_to_hz(map.long_distance_mean(p.long_distance))),
        };
        PowerMapFile { n, selection: p.pairs, entries, stats }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub core_version: String,
    pub seed: u64,
    pub threads: usize,
    pub config_sha256: String,
    pub config: RunConfig,
    /// sha256 of every file read.
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every file written, except this manifest.
    pub outputs: BTreeMap<String, String>,
    pub timings_s: BTreeMap<String, f64>,
    pub summary: BTreeMap<String, serde_json::Value>,
}

// ---- CSV ----

fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.serialize(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory write")
}

pub fn crystal_csv(crystal: &IonCrystal) -> Vec<u8> {
    csv_bytes(&["index", "z_m"], crystal.positions.iter().enumerate().map(|(i, &z)| (i + 1, z)))
}

pub fn spectrum_csv(modes: &ModeData) -> Vec<u8> {
    csv_bytes(&["k", "frequency_hz"], modes.frequencies.iter().enumerate().map(|(k, &w)| (k + 1, rad_to_hz(w))))
}

/// `rows` of (t, Ω/2π, δμ/2π).
pub fn waveform_csv(rows: &[(f64, f64, f64)]) -> Vec<u8> {
    csv_bytes(&["t_s", "rabi_hz", "fm_offset_hz"], rows.iter().copied())
}

pub fn trace_csv(trace: &[(usize, f64)]) -> Vec<u8> {
    csv_bytes(&["evaluation", "cost"], trace.iter().copied())
}

pub fn trajectory_rows_csv(rows: &[(f64, Complex64)]) -> Vec<u8> {
    csv_bytes(&["t_s", "re_alpha", "im_alpha"], rows.iter().map(|(t, a)| (*t, a.re, a.im)))
}

pub fn sweep_csv(sweep: &SweepFile) -> Vec<u8> {
    let excess = sweep.excess();
    csv_bytes(
        &["offset_hz", "error", "excess"],
        sweep.offsets_hz.iter().zip(&sweep.errors).zip(excess).map(|((&d, &e), x)| (d, e, x)),
    )
}

pub fn powermap_csv(map: &PowerMapFile) -> Vec<u8> {
    csv_bytes(&["i", "j", "omega_max_hz"], map.entries.iter().map(|r| (r.i, r.j, r.omega_max_hz.unwrap_or(f64::NAN))))
}

/// Reads a CSV file, checking the header, into typed rows.
pub fn read_csv<R: DeserializeOwned>(path: &Path, header: &[&str]) -> Result<Vec<R>, CliError> {
    let bad = |message: String| CliError::Format { path: path.to_owned(), message };
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let found = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(bad(format!(
            "expected header {}, found {}",
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize().map(|row| row.map_err(|e| bad(e.to_string()))).collect()
}

pub const CRYSTAL_HEADER: [&str; 2] = ["index", "z_m"];
pub const SPECTRUM_HEADER: [&str; 2] = ["k", "frequency_hz"];
pub const WAVEFORM_HEADER: [&str; 3] = ["t_s", "rabi_hz", "fm_offset_hz"];
pub const TRACE_HEADER: [&str; 2] = ["evaluation", "cost"];
pub const TRAJECTORY_HEADER: [&str; 3] = ["t_s", "re_alpha", "im_alpha"];
pub const SWEEP_HEADER: [&str; 3] = ["offset_hz", "error", "excess"];
pub const POWERMAP_HEADER: [&str; 3] = ["i", "j", "omega_max_hz"];

// ---- JSON ----

pub fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io { path: path.to_owned(), source })?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Format { path: path.to_owned(), message: e.to_string() })
}

// ---- staged output ----

/// Files produced by one command, held in memory until [`OutputSet::commit`].
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        self.add(name, json_bytes(value));
    }

    pub fn digests(&self) -> BTreeMap<String, String> {
        self.files.iter().map(|(n, b)| (n.clone(), sha256_hex(b))).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file to a hidden temporary next to its target, then
    /// renames them all into place. Nothing is left behind if a write fails.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |path: &Path| {
            let path = path.to_owned();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
        let mut made_dirs: Vec<PathBuf> = Vec::new();
        let stage = |staged: &mut Vec<(PathBuf, PathBuf)>, made_dirs: &mut Vec<PathBuf>| -> Result<(), CliError> {
            for (name, bytes) in &self.files {
                let target = dir.join(name);
                let parent = target.parent().unwrap_or(dir).to_owned();
                if !parent.exists() {
                    fs::create_dir_all(&parent).map_err(io(&parent))?;
                    made_dirs.push(parent.clone());
                }
                let file_name = target.file_name().and_then(|s| s.to_str()).unwrap_or("out");
                let tmp = parent.join(format!(".{file_name}.tmp"));
                fs::write(&tmp, bytes).map_err(io(&tmp))?;
                staged.push((tmp, target));
            }
            Ok(())
        };
        if let Err(e) = stage(&mut staged, &mut made_dirs) {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            for d in made_dirs.iter().rev() {
                let _ = fs::remove_dir(d);
            }
            return Err(e);
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            fs::rename(&tmp, &target).map_err(io(&target))?;
            written.push(target);
        }
        Ok(written)
    }
}
