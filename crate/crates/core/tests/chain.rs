//! Physics checks on the default 50-ion chain.

use std::sync::OnceLock;

use approx::assert_relative_eq;
use ionchain_core::analysis::{offset_sweep, power_map, power_map_pairs, PowerEntry};
use ionchain_core::consts::{hz_to_rad, rad_to_hz, ELEMENTARY_CHARGE};
use ionchain_core::crystal::{edge_field, edge_field_asymptote, solve_equilibrium, trap_depth};
use ionchain_core::modes::{build_transverse_matrix, compute_modes, lamb_dicke_factor};
use ionchain_core::optimizer::calibrate_power;
use ionchain_core::pulse::{AmplitudeShape, PulseSchedule};
use ionchain_core::trajectory::{
    entangling_angle, entangling_angle_nested, motional_error, ErrorConvention, SampledPulse, TimeGrid,
};
use ionchain_core::{EquilibriumOptions, IonCrystal, ModeData, TrapConfig};

struct Chain {
    cfg: TrapConfig,
    crystal: IonCrystal,
    modes: ModeData,
}

fn chain() -> &'static Chain {
    static CHAIN: OnceLock<Chain> = OnceLock::new();
    CHAIN.get_or_init(|| {
        let cfg = TrapConfig::fifty_ion_chain();
        let crystal = solve_equilibrium(&cfg, &EquilibriumOptions::default()).unwrap();
        let modes = compute_modes(&crystal, &cfg).unwrap();
        Chain { cfg, crystal, modes }
    })
}

/// μ₀ sits 3.7 kHz below the mode whose pattern repeats every four ions.
fn mu_ref(m: &ModeData) -> f64 {
    m.frequencies[24] - hz_to_rad(3.7e3)
}

fn flat_a() -> PulseSchedule {
    PulseSchedule::standard(AmplitudeShape::pulse_a(), hz_to_rad(100e3), mu_ref(&chain().modes))
}

#[test]
fn spacing_is_nearly_uniform() {
    let c = &chain().crystal;
    let mean = c.mean_spacing();
    assert!((2.75e-6..=3.05e-6).contains(&mean), "{mean}");
    assert!(c.spacing_variation() < 0.05);
    assert!(c.mirror_asymmetry() < 1e-12);
}

#[test]
fn edge_field_and_depth() {
    let cfg = &chain().cfg;
    let e = edge_field(cfg);
    assert_relative_eq!(e, 260.0, max_relative = 1e-3);
    assert!(e < edge_field_asymptote(cfg));
    let depth_mev = trap_depth(cfg) / ELEMENTARY_CHARGE * 1e3;
    assert!((depth_mev - 1.52).abs() < 0.152, "{depth_mev}");
}

#[test]
fn spectrum_band() {
    let m = &chain().modes;
    let low = rad_to_hz(m.frequencies[0]);
    assert!((2.40e6..=2.50e6).contains(&low), "{low}");
    assert_relative_eq!(m.frequencies[49], chain().cfg.omega_x, max_relative = 1e-9);
    assert!(m.orthonormality_defect() < 1e-10);
}

#[test]
fn coupling_rows_sum_to_the_trap_frequency() {
    let Chain { cfg, crystal, .. } = chain();
    let a = build_transverse_matrix(crystal, cfg).unwrap();
    let w2 = cfg.omega_x * cfg.omega_x;
    for r in 0..a.rows() {
        let s: f64 = a.row(r).iter().sum();
        assert_relative_eq!(s, w2, max_relative = 1e-12);
    }
}

#[test]
fn reference_mode_has_period_four() {
    let m = &chain().modes;
    assert_eq!(m.sign_changes(24), 25);
    assert!(m.participation_ratio(24) > 0.7);
    let split = rad_to_hz(m.sideband_splitting(24));
    assert!((10e3..25e3).contains(&split), "{split}");
}

#[test]
fn single_ion_lamb_dicke() {
    let cfg = &chain().cfg;
    let eta = lamb_dicke_factor(1.0, cfg.omega_x, cfg);
    assert_relative_eq!(eta, 0.10986, max_relative = 1e-3);
}

#[test]
fn unmodulated_baseline_is_of_order_one_in_a_thousand() {
    let m = &chain().modes;
    let s = flat_a();
    let omega = calibrate_power(&s, m, 24, 25, TimeGrid::default()).unwrap();
    let e =
        motional_error(&s.with_amp_scale(omega), m, 24, 25, ErrorConvention::BothIons, TimeGrid::default()).unwrap();
    assert!((1e-4..=1e-2).contains(&e), "{e}");
}

#[test]
fn far_detuned_modes_barely_contribute() {
    let m = &chain().modes;
    let s = flat_a();
    let omega = calibrate_power(&s, m, 24, 25, TimeGrid::default()).unwrap();
    let s = s.with_amp_scale(omega);
    let r = SampledPulse::new(&s, TimeGrid::default()).responses(m);
    let weight = |k: usize| ErrorConvention::BothIons.weight(m, 24, 25, k) * r[k].endpoint.norm_sqr();
    let total: f64 = (0..m.len()).map(weight).sum();
    let far: f64 = (0..m.len()).filter(|&k| (s.mu_ref - m.frequencies[k]).abs() > hz_to_rad(100e3)).map(weight).sum();
    assert!(far < 0.1 * total, "{far} of {total}");
}

#[test]
fn error_converges_under_refinement() {
    let m = &chain().modes;
    let s = flat_a().with_fm_points(vec![-4000.0, 3800.0, 2500.0, -200.0, -1500.0, -900.0, 200.0, 600.0]);
    let g = TimeGrid::default();
    let a = motional_error(&s, m, 24, 25, ErrorConvention::BothIons, g).unwrap();
    let b = motional_error(&s, m, 24, 25, ErrorConvention::BothIons, g.refined()).unwrap();
    assert!((a - b).abs() < 0.01 * b);
}

#[test]
fn nested_beta_on_the_chain() {
    let m = &chain().modes;
    let s = flat_a();
    let fast = entangling_angle(&s, m, 24, 25, TimeGrid::default()).unwrap();
    // modes 600 kHz away are barely resolved at 2000 points, so only ask for
    // percent agreement and second-order convergence
    let coarse = entangling_angle_nested(&s, m, 24, 25, 1000).unwrap();
    let nested = entangling_angle_nested(&s, m, 24, 25, 2000).unwrap();
    assert_relative_eq!(nested, fast, max_relative = 2e-2);
    let ratio = (coarse - fast).abs() / (nested - fast).abs();
    assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn calibration_properties() {
    let m = &chain().modes;
    let s = flat_a();
    let g = TimeGrid::default();
    let omega = calibrate_power(&s, m, 10, 37, g).unwrap();
    let doubled = calibrate_power(&s.clone().with_amp_scale(2.0 * s.amp_scale), m, 10, 37, g).unwrap();
    assert_relative_eq!(omega, doubled, max_relative = 1e-12);
    let beta = entangling_angle(&s.with_amp_scale(omega), m, 10, 37, g).unwrap();
    assert!((beta.abs() - std::f64::consts::FRAC_PI_4).abs() < 1e-6);
}

#[test]
fn power_map_is_symmetric_and_finite() {
    let m = &chain().modes;
    let map = power_map(&flat_a(), m, TimeGrid::new(4000));
    assert_eq!(map.calibrated().len(), 1225);
    for i in 0..50 {
        assert_eq!(map.get(i, i), PowerEntry::Diagonal);
        for j in 0..50 {
            assert_eq!(map.get(i, j), map.get(j, i));
        }
    }
    let subset = power_map_pairs(&flat_a(), m, &[(3, 9), (40, 41)], TimeGrid::new(4000));
    assert_eq!(subset.calibrated().len(), 2);
    assert_eq!(subset.get(3, 9), map.get(3, 9));
    assert_eq!(subset.get(0, 1), PowerEntry::Skipped);
}

#[test]
fn sweep_starts_at_baseline_and_varies_smoothly() {
    let m = &chain().modes;
    let s = flat_a().with_fm_points(vec![-4000.0, 3800.0, 2500.0, -200.0, -1500.0, -900.0, 200.0, 600.0]);
    let g = TimeGrid::new(4000);
    let e0 = motional_error(&s, m, 24, 25, ErrorConvention::BothIons, g).unwrap();
    let offsets = [hz_to_rad(5.0), hz_to_rad(10.0), hz_to_rad(20.0)];
    let sweep = offset_sweep(&s, m, (24, 25), &offsets, ErrorConvention::BothIons, g).unwrap();
    assert_eq!(sweep.baseline, e0);
    let ex = sweep.excess();
    assert!(ex[0].abs() < 10.0 * ex[1].abs() && ex[1].abs() < 10.0 * ex[2].abs());
}
