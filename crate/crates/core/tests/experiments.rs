use nvcqed::constants::TAU;
use nvcqed::cumulant::{single_spin_steady_population, thermal_equilibrium_state};
use nvcqed::experiments::{
    compare_with_oracle, linear_grid, run, steady_sweep, ExperimentSpec, Preset, ReportBody,
};
use nvcqed::io::{parse_config, write_report, RunManifest};
use nvcqed::integrator::{steady_state, SteadyStateConfig};
use nvcqed::model::population_relaxation_rate;
use nvcqed::oracle::{build_liouvillian, evolve, moments, DensityMatrix, HilbertLayout};
use nvcqed::SystemParams;

fn small_spectrum_spec() -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset(Preset::Fig3b);
    spec.eta_values = vec![0.0, 1e3];
    spec.drive_detunings = linear_grid(-TAU * 20e6, TAU * 20e6, 21);
    spec
}

#[test]
fn dicke_map_reference_points() {
    let mut spec = ExperimentSpec::preset(Preset::Fig2b);
    spec.temperatures = vec![1e-3, 293.0];
    spec.eta_values = vec![0.0, 1e6];
    let report = run(&spec).unwrap();
    let ReportBody::DickeMap(points) = report.body else { panic!() };
    let at = |t: f64, e: f64| points.iter().find(|p| p.temperature == t && p.eta_s == e).unwrap();
    let n = spec.params.n_spins;
    let cold = at(1e-3, 0.0);
    assert!((cold.dicke.j / (0.5 * n) - 1.0).abs() < 1e-9);
    assert!((cold.dicke.m / (0.5 * n) + 1.0).abs() < 1e-9);
    assert!((at(293.0, 0.0).j_fraction / 2.2e-4 - 1.0).abs() < 0.02);
    assert!((at(293.0, 1e6).j_fraction - 0.996).abs() < 1e-3);
    for p in &points {
        assert!(p.dicke.within_triangle(n, 1e-12));
    }
}

#[test]
fn spectrum_is_independent_of_sweep_direction() {
    let mut p = SystemParams::fig3();
    p.eta_s = 1e3;
    let amp = TAU * 1e6;
    let grid = linear_grid(-TAU * 20e6, TAU * 20e6, 41);
    let cfg = nvcqed::integrator::SteadyStateConfig::default();
    let s0 = thermal_equilibrium_state(&p, &p.occupancies().unwrap()).unwrap();
    let at = |x: f64| SystemParams { omega_d: p.omega_c + x, ..p };
    let fwd = steady_sweep(&s0, &grid, at, amp, &cfg).unwrap();
    let rev_grid: Vec<f64> = grid.iter().rev().copied().collect();
    let mut rev = steady_sweep(&s0, &rev_grid, at, amp, &cfg).unwrap();
    rev.reverse();
    for (a, b) in fwd.iter().zip(&rev) {
        assert!(a.converged && b.converged);
        let (x, y) = (a.state.photon_number(), b.state.photon_number());
        assert!((x - y).abs() <= 2.0 * cfg.rel_tol * x, "{x} vs {y}");
    }
}

#[test]
fn runs_are_deterministic_across_worker_counts() {
    let mut a = small_spectrum_spec();
    a.workers = 1;
    let mut b = a.clone();
    b.workers = 3;
    let dir = tempfile::tempdir().unwrap();
    let (da, db) = (dir.path().join("a"), dir.path().join("b"));
    for (spec, out) in [(&a, &da), (&b, &db)] {
        let report = run(spec).unwrap();
        write_report(&report, &RunManifest::new(spec, &report), out, false).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(&da).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let csvs: Vec<_> = names.iter().filter(|n| n.to_string_lossy().ends_with(".csv")).collect();
    assert_eq!(
        csvs.iter().map(|n| n.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        ["hybrid_modes.csv", "peaks.csv", "spectrum_eta_0.csv", "spectrum_eta_1e3.csv"]
    );
    for n in csvs {
        assert_eq!(std::fs::read(da.join(n)).unwrap(), std::fs::read(db.join(n)).unwrap(), "{n:?}");
    }
    let header = std::fs::read_to_string(da.join("spectrum_eta_1e3.csv")).unwrap();
    assert!(header.starts_with("drive_detuning_hz,photon_number\n"));
}

#[test]
fn write_report_refuses_to_overwrite() {
    let mut spec = ExperimentSpec::preset(Preset::Fig2b);
    spec.temperatures = vec![293.0];
    let report = run(&spec).unwrap();
    let manifest = RunManifest::new(&spec, &report);
    let dir = tempfile::tempdir().unwrap();
    write_report(&report, &manifest, dir.path(), false).unwrap();
    let before = std::fs::read(dir.path().join("dicke_map.csv")).unwrap();
    assert!(matches!(write_report(&report, &manifest, dir.path(), false), Err(nvcqed::Error::WouldOverwrite(_))));
    write_report(&report, &manifest, dir.path(), true).unwrap();
    assert_eq!(std::fs::read(dir.path().join("dicke_map.csv")).unwrap(), before);
    assert!(dir.path().join("plot.py").exists());
}

#[test]
fn manifest_reproduces_the_run() {
    let spec = small_spectrum_spec();
    let report = run(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    write_report(&report, &RunManifest::new(&spec, &report), &first, false).unwrap();
    let again = parse_config(&first.join("manifest.json"), None).unwrap();
    assert_eq!(again, spec);
    let report2 = run(&again).unwrap();
    let second = dir.path().join("second");
    write_report(&report2, &RunManifest::new(&again, &report2), &second, false).unwrap();
    for name in ["spectrum_eta_0.csv", "spectrum_eta_1e3.csv", "peaks.csv"] {
        assert_eq!(std::fs::read(first.join(name)).unwrap(), std::fs::read(second.join(name)).unwrap());
    }
}

#[test]
fn superradiance_trajectory_layout() {
    let mut spec = ExperimentSpec::preset(Preset::Fig4);
    spec.eta_values = vec![1e6];
    let report = run(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_report(&report, &RunManifest::new(&spec, &report), dir.path(), false).unwrap();
    let text = std::fs::read_to_string(dir.path().join("trajectory_eta_1e6.csv")).unwrap();
    assert!(text.starts_with("time_s,photon_number,upper_population,dicke_j,dicke_m\n"));
    let ReportBody::Superradiance(runs) = &report.body else { panic!() };
    let n = spec.params.n_spins;
    assert!(runs[0].trajectory.dicke.iter().all(|d| d.j <= 0.5 * n + 1e-6 * n));
}

#[test]
fn pulse_tail_returns_to_cooled_equilibrium() {
    let mut spec = ExperimentSpec::preset(Preset::Fig3a);
    spec.eta_values = vec![1e4];
    let p = spec.params_at_eta(1e4);
    let occ = p.occupancies().unwrap();
    spec.tail_duration = Some(15.0 / population_relaxation_rate(&p, &occ));
    spec.samples = 301;
    let report = run(&spec).unwrap();
    let ReportBody::RabiTransient(runs) = &report.body else { panic!() };
    let end = runs[0].trajectory.states.last().unwrap();
    // The undriven fixed point of the coupled equations from the same start.
    let start = thermal_equilibrium_state(&p, &occ).unwrap();
    let eq = steady_state(&start, &p, 0.0, &SteadyStateConfig::default()).unwrap();
    assert!(eq.converged);
    assert!((end.photon_number() / eq.state.photon_number() - 1.0).abs() < 1e-4);
    assert!((end.upper_population() / eq.state.upper_population() - 1.0).abs() < 1e-4);
    // Decoupled-limit check: the coupling barely moves the spins.
    let p_eq = single_spin_steady_population(&p, &occ).unwrap();
    assert!((end.upper_population() / p_eq - 1.0).abs() < 1e-2);
}

#[test]
fn oracle_is_insensitive_to_a_larger_cutoff() {
    let spec = ExperimentSpec::preset(Preset::OracleCheck);
    let run = compare_with_oracle(&spec, 2, spec.drive_amplitude).unwrap();
    let params = SystemParams { n_spins: 2.0, ..spec.params };
    let occ = params.occupancies().unwrap();
    let pop = single_spin_steady_population(&params, &occ).unwrap();
    let layout = HilbertLayout::new(2, run.fock_cutoff + 5).unwrap();
    let rho0 = DensityMatrix::thermal_product(layout, occ.n_c_th, pop).unwrap();
    let l = build_liouvillian(&params, layout, spec.drive_amplitude).unwrap();
    let bigger = evolve(&rho0, &l, &run.times, &spec.integration).unwrap();
    for (a, b) in run.exact.iter().zip(&bigger).skip(1) {
        let (x, y) = (a.photon_number(), moments(b).slots.photon_number());
        assert!((x - y).abs() <= 1e-3 * y, "{x} vs {y}");
    }
}
