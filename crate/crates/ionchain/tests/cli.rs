use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ionchain::config::RunConfig;
use ionchain::files::*;
use ionchain_core::consts::{COULOMB_K, ELEMENTARY_CHARGE, YB171_MASS};
use ionchain_core::optimizer;
use ionchain_core::trajectory::TimeGrid;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn pair_config() -> PathBuf {
    workspace().join("configs/harmonic_pair.toml")
}

fn ionchain(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ionchain"))
        .args(args)
        .arg("--quiet")
        .arg("--config")
        .arg(pair_config())
        .arg("--output-dir")
        .arg(out)
        .env_remove("IONCHAIN_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = ionchain(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> =
        walk(dir).into_iter().map(|p| p.strip_prefix(dir).unwrap().display().to_string()).collect();
    names.sort();
    names
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn cfg() -> RunConfig {
    RunConfig::load(&pair_config()).unwrap()
}

#[test]
fn two_ion_spacing_matches_force_balance() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["crystal"], dir.path());
    // m ω² (d/2) = k e² / d²
    let w = 2.0 * std::f64::consts::PI * 1e6;
    let d = (2.0 * COULOMB_K * ELEMENTARY_CHARGE.powi(2) / (YB171_MASS * w * w)).cbrt();
    let rows: Vec<(usize, f64)> = read_csv(&dir.path().join(CRYSTAL_CSV), &CRYSTAL_HEADER).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(((rows[1].1 - rows[0].1) / d - 1.0).abs() < 1e-9);
    assert!((rows[0].1 + rows[1].1).abs() < 1e-12 * d);
}

#[test]
fn every_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for c in ["sweep", "report", "powermap"] {
        ok(&[c, "--with-prereqs"], d);
    }
    let json = |name: &str| fs::read(d.join(name)).unwrap();
    let check = |name: &str, bytes: Vec<u8>| assert_eq!(bytes, json(name), "{name}");

    let crystal: CrystalFile = read_json(&d.join(CRYSTAL_JSON)).unwrap();
    check(CRYSTAL_JSON, json_bytes(&crystal));
    let csv: Vec<(usize, f64)> = read_csv(&d.join(CRYSTAL_CSV), &CRYSTAL_HEADER).unwrap();
    assert_eq!(csv.iter().map(|r| r.1).collect::<Vec<_>>(), crystal.positions_m);

    let modes: ModesFile = read_json(&d.join(MODES_JSON)).unwrap();
    check(MODES_JSON, json_bytes(&modes));
    let trap = cfg().trap_config().unwrap();
    assert_eq!(ModesFile::new(&modes.trap, &modes.modes(&trap).unwrap()), modes);
    let csv: Vec<(usize, f64)> = read_csv(&d.join(SPECTRUM_CSV), &SPECTRUM_HEADER).unwrap();
    assert_eq!(csv.iter().map(|r| r.1).collect::<Vec<_>>(), modes.frequencies_hz);

    let sched: ScheduleFile = read_json(&d.join(SCHEDULE_JSON)).unwrap();
    check(SCHEDULE_JSON, json_bytes(&sched));
    let c = cfg();
    assert_eq!(ScheduleFile::new(&c, &sched.schedule().unwrap()), sched);
    let wave: Vec<(f64, f64, f64)> = read_csv(&d.join(WAVEFORM_CSV), &WAVEFORM_HEADER).unwrap();
    assert_eq!(wave.len(), c.report.waveform_points);
    assert_eq!(wave.last().unwrap().0, sched.gate_time_s);
    let trace: Vec<(usize, f64)> = read_csv(&d.join(TRACE_CSV), &TRACE_HEADER).unwrap();
    assert!(trace.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1));

    let report: ReportFile = read_json(&d.join(REPORT_JSON)).unwrap();
    check(REPORT_JSON, json_bytes(&report));
    for name in &report.trajectory_files {
        let rows: Vec<(f64, f64, f64)> = read_csv(&d.join(name), &TRAJECTORY_HEADER).unwrap();
        let k: usize = name.trim_start_matches("trajectories/mode_").trim_end_matches(".csv").parse().unwrap();
        let end = rows.last().unwrap();
        let row = &report.modes[k - 1];
        assert_eq!((end.1, end.2), (row.alpha_end_re, row.alpha_end_im));
        assert_eq!(end.0, sched.gate_time_s);
    }

    let sweep: SweepFile = read_json(&d.join(SWEEP_JSON)).unwrap();
    check(SWEEP_JSON, json_bytes(&sweep));
    let rows: Vec<(f64, f64, f64)> = read_csv(&d.join(SWEEP_CSV), &SWEEP_HEADER).unwrap();
    assert_eq!(rows.iter().map(|r| r.0).collect::<Vec<_>>(), sweep.offsets_hz);
    assert_eq!(rows.iter().map(|r| r.2).collect::<Vec<_>>(), sweep.excess());

    let map: PowerMapFile = read_json(&d.join(POWERMAP_JSON)).unwrap();
    check(POWERMAP_JSON, json_bytes(&map));
    let rows: Vec<(usize, usize, f64)> = read_csv(&d.join(POWERMAP_CSV), &POWERMAP_HEADER).unwrap();
    assert_eq!(rows.len(), map.entries.len());
    for (r, e) in rows.iter().zip(&map.entries) {
        assert_eq!((r.0, r.1), (e.i, e.j));
        match e.omega_max_hz {
            Some(v) => assert_eq!(r.2, v),
            None => assert!(r.2.is_nan()),
        }
    }

    for cmd in ["crystal", "modes", "optimize", "report", "sweep", "powermap"] {
        let m: Manifest = read_json(&d.join(manifest_json(cmd))).unwrap();
        check(&manifest_json(cmd), json_bytes(&m));
        for (name, digest) in &m.outputs {
            assert_eq!(&sha256_hex(&json(name)), digest, "{cmd}: {name}");
        }
    }
}

#[test]
fn reruns_and_prereq_modes_agree_bytewise() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&["optimize", "--with-prereqs"], a.path());
    for c in ["crystal", "modes", "optimize"] {
        ok(&[c, "--threads", "1"], b.path());
    }
    let read = |d: &Path, n: &str| fs::read(d.join(n)).unwrap();
    for name in [CRYSTAL_JSON, MODES_JSON, SCHEDULE_JSON, TRACE_CSV, WAVEFORM_CSV] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    ok(&["optimize"], a.path());
    assert_eq!(read(a.path(), SCHEDULE_JSON), read(b.path(), SCHEDULE_JSON));
}

#[test]
fn parallel_optimize_matches_sequential_core() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["optimize", "--with-prereqs"], dir.path());
    let c = cfg();
    let modes: ModesFile = read_json(&dir.path().join(MODES_JSON)).unwrap();
    let modes = modes.modes(&c.trap_config().unwrap()).unwrap();
    let problem = c.problem(&modes).unwrap();
    let outcome = optimizer::optimize(&problem, &modes).unwrap();
    let (i, j) = problem.ion_pair;
    let amp = optimizer::calibrate_power(&outcome.schedule, &modes, i, j, TimeGrid::default()).unwrap();
    let expected = ScheduleFile::new(&c, &outcome.schedule.with_amp_scale(amp));
    assert_eq!(read_json::<ScheduleFile>(&dir.path().join(SCHEDULE_JSON)).unwrap(), expected);
    let trace: Vec<(usize, f64)> = read_csv(&dir.path().join(TRACE_CSV), &TRACE_HEADER).unwrap();
    assert_eq!(trace, outcome.trace);
}

#[test]
fn spectrum_tops_out_at_the_transverse_frequency() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["modes", "--with-prereqs"], dir.path());
    let rows: Vec<(usize, f64)> = read_csv(&dir.path().join(SPECTRUM_CSV), &SPECTRUM_HEADER).unwrap();
    assert!((rows.last().unwrap().1 / 3.07e6 - 1.0).abs() < 1e-9);
}

#[test]
fn missing_prerequisite_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let o = ionchain(&["modes"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&o.stderr);
    assert!(
        msg.contains("crystal.json") && msg.contains("ionchain crystal") && msg.contains("--with-prereqs"),
        "{msg}"
    );
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);

    ok(&["crystal"], dir.path());
    let o = ionchain(&["report"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("modes.json"));
}

#[test]
fn stale_prerequisite_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["modes", "--with-prereqs"], dir.path());
    let changed = dir.path().join("changed.toml");
    let text =
        fs::read_to_string(pair_config()).unwrap().replace("axial_frequency_hz = 1e6", "axial_frequency_hz = 1.1e6");
    fs::write(&changed, text).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ionchain"))
        .args(["modes", "--quiet", "--config"])
        .arg(&changed)
        .arg("--output-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("different [trap]"));
}

#[test]
fn unwritable_output_dir_exits_2_without_partial_files() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, b"").unwrap();
    let o = ionchain(&["crystal"], &blocker.join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(files_in(dir.path()), vec!["blocker".to_owned()]);
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[optimize]\npair = [1, 60]\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_ionchain")).args(["crystal", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pair ion 60"));
}

#[test]
fn output_dir_precedence_is_flag_env_config() {
    let dir = tempfile::tempdir().unwrap();
    let from_env = dir.path().join("env");
    let from_flag = dir.path().join("flag");
    let run = |flag: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_ionchain"));
        c.args(["crystal", "--quiet", "--config"]).arg(pair_config()).env("IONCHAIN_OUTPUT_DIR", &from_env);
        if flag {
            c.arg("--output-dir").arg(&from_flag);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(false);
    assert!(from_env.join(CRYSTAL_JSON).exists());
    run(true);
    assert!(from_flag.join(CRYSTAL_JSON).exists());
}

#[test]
fn writes_exactly_the_documented_files() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["report", "--with-prereqs"], dir.path());
    let c = cfg();
    assert_eq!(c.optimize.n_targets, 2);
    assert_eq!(
        files_in(dir.path()),
        [
            "crystal.csv",
            "crystal.json",
            "manifest-crystal.json",
            "manifest-modes.json",
            "manifest-optimize.json",
            "manifest-report.json",
            "modes.json",
            "report.json",
            "schedule.json",
            "spectrum.csv",
            "trace.csv",
            "trajectories/mode_01.csv",
            "trajectories/mode_02.csv",
            "waveform.csv",
        ]
    );
    let m: Manifest = read_json(&dir.path().join(manifest_json("optimize"))).unwrap();
    assert_eq!(m.inputs.keys().collect::<Vec<_>>(), ["modes.json"]);
    assert!(m.summary["motional_error"].as_f64().unwrap() < 1e-4);
    assert!(m.summary["motional_error"].as_f64().unwrap() < m.summary["baseline_error"].as_f64().unwrap());
}
