//! Acceptance run: every criterion is measured at the default tolerances and
//! again with all integrator tolerances halved, then reported as one
//! PASS/FAIL line each.
//!
//! The process fails on any FAIL that is not listed in `KNOWN_FAILURES`, and
//! also when a listed one unexpectedly passes, so the list stays accurate.

use std::process::ExitCode;
use std::time::Instant;

use nvcqed::constants::{HBAR, K_B, TAU};
use nvcqed::cumulant::{dicke_from_cumulants, dicke_from_population, root_of_jj1};
use nvcqed::experiments::{compare_with_oracle, run, ExperimentSpec, Preset, ReportBody};
use nvcqed::integrator::steady_state;
use nvcqed::model::thermal_occupation;
use nvcqed::oracle::{moments, DensityMatrix, HilbertLayout};
use nvcqed::{CumulantState, Slot, SystemParams};
use num_complex::Complex64;

/// Criteria that fail for a documented reason: the superradiant pulse ends
/// with the upper population near the masing threshold (~0.6) rather than 0.5
/// at the two lower cooling rates.
const KNOWN_FAILURES: &[usize] = &[7];

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn mhz(w: f64) -> f64 {
    w / TAU / 1e6
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Everything the criteria look at, from one tolerance setting.
#[derive(Debug, Clone, Default)]
struct Measured {
    residue: f64,
    // 1
    oracle_photon_dev: f64,
    oracle_first_order_dev: f64,
    oracle_max_photons: f64,
    oracle_seconds: f64,
    // 2: (photon, population) relative errors at 293 K and 25 mK
    thermal_errors: Vec<(f64, f64)>,
    // 5
    spectrum_peaks: Vec<Vec<f64>>,
    spectrum_dips: Vec<Vec<usize>>,
    spectrum_predicted: Vec<f64>,
    spectrum_step: f64,
    spectrum_centre: usize,
    spectrum_converged: bool,
    spectrum_seconds: f64,
    // 6
    rabi_modulation: Vec<f64>,
    rabi_measured: Vec<Option<f64>>,
    rabi_predicted: Vec<f64>,
    // 7
    burst_peaks: Vec<f64>,
    durations: Vec<f64>,
    plateaus: Vec<f64>,
    recool: Vec<Option<f64>>,
    // 8
    inferred: Vec<(f64, Option<f64>)>,
    sense_step: f64,
    resonant_min: f64,
    sweep_step: f64,
    sense_converged: bool,
}

fn with_tolerance(mut spec: ExperimentSpec, factor: f64) -> ExperimentSpec {
    spec.integration = spec.integration.scaled(factor);
    spec.steady.integration = spec.steady.integration.scaled(factor);
    spec
}

fn measure(factor: f64) -> Measured {
    let mut m = Measured::default();

    let oracle = with_tolerance(ExperimentSpec::preset(Preset::OracleCheck), factor);
    let t = Instant::now();
    let o = compare_with_oracle(&oracle, 2, oracle.drive_amplitude).expect("oracle run");
    m.oracle_seconds = t.elapsed().as_secs_f64();
    m.oracle_photon_dev = o.deviation(Slot::AdA);
    m.oracle_first_order_dev = o.first_order_deviation();
    m.oracle_max_photons = o.max_exact_photon_number();
    m.residue = o.cumulant.iter().map(CumulantState::hermiticity_residue).fold(0.0, f64::max);

    // Uncoupled, undriven fixed points against closed-form occupations.
    let steady = with_tolerance(ExperimentSpec::preset(Preset::Fig3b), factor).steady;
    for temperature in [293.0, 0.025] {
        let p = SystemParams { g_s: 0.0, temperature, eta_s: 1e3, ..SystemParams::fig3() };
        let bose = |w: f64| 1.0 / ((HBAR * w / (K_B * temperature)).exp() - 1.0);
        let (nc, ns) = (bose(p.omega_c), bose(p.omega_s));
        let pop = ns * p.gamma_s / (p.eta_s + p.gamma_s * (1.0 + 2.0 * ns));
        let r = steady_state(&CumulantState::vacuum(), &p, 0.0, &steady).expect("thermal steady state");
        m.residue = m.residue.max(r.state.hermiticity_residue());
        m.thermal_errors.push((rel(r.state.photon_number(), nc), rel(r.state.upper_population(), pop)));
    }

    let spec = with_tolerance(ExperimentSpec::preset(Preset::Fig3b), factor);
    let t = Instant::now();
    let report = run(&spec).expect("spectrum run");
    m.spectrum_seconds = t.elapsed().as_secs_f64();
    m.spectrum_converged = report.all_converged();
    m.residue = m.residue.max(report.max_hermiticity_residue);
    m.spectrum_step = spec.drive_detunings[1] - spec.drive_detunings[0];
    m.spectrum_centre = spec.drive_detunings.len() / 2;
    let ReportBody::RabiSpectrum(runs) = report.body else { unreachable!() };
    for r in &runs {
        m.spectrum_peaks.push(r.peaks.frequencies());
        m.spectrum_dips.push(r.dips.clone());
        m.spectrum_predicted.push(r.predicted.splitting());
    }

    let spec = with_tolerance(ExperimentSpec::preset(Preset::Fig3a), factor);
    let report = run(&spec).expect("transient run");
    m.residue = m.residue.max(report.max_hermiticity_residue);
    let ReportBody::RabiTransient(runs) = report.body else { unreachable!() };
    for r in &runs {
        m.rabi_modulation.push(r.envelope_modulation);
        m.rabi_measured.push(r.measured_frequency);
        m.rabi_predicted.push(r.predicted_frequency);
    }

    let spec = with_tolerance(ExperimentSpec::preset(Preset::Fig4), factor);
    let report = run(&spec).expect("superradiance run");
    m.residue = m.residue.max(report.max_hermiticity_residue);
    let ReportBody::Superradiance(runs) = report.body else { unreachable!() };
    for r in &runs {
        let x = r.metrics.expect("pulse metrics");
        m.burst_peaks.push(x.burst_peak);
        m.durations.push(x.duration);
        m.plateaus.push(x.plateau);
        m.recool.push(x.recool_time);
    }

    let spec = with_tolerance(ExperimentSpec::preset(Preset::Fig5a), factor);
    let report = run(&spec).expect("sensing run");
    m.sense_converged = report.all_converged();
    m.residue = m.residue.max(report.max_hermiticity_residue);
    m.sense_step = spec.drive_detunings[1] - spec.drive_detunings[0];
    m.sweep_step = spec.spin_sweep[1] - spec.spin_sweep[0];
    let ReportBody::Sensing(s) = report.body else { unreachable!() };
    for r in &s.spectra {
        m.inferred.push((r.spin_detuning, r.inferred_spin_detuning));
    }
    let resonant = s.curves.iter().find(|c| c.drive_offset == 0.0).expect("resonant curve");
    m.resonant_min = resonant.spin_detunings[resonant.min_index];
    m
}

fn oracle_equivalence(m: &Measured) -> Outcome {
    let pass = m.oracle_photon_dev < 0.05
        && m.oracle_first_order_dev < 0.02
        && m.oracle_max_photons < 0.1
        && m.oracle_seconds < 120.0;
    Outcome {
        id: 1,
        name: "oracle equivalence (N=2, weak drive)",
        pass,
        detail: format!(
            "photon number dev {:.2e}, first-order dev {:.2e}, max photons {:.3}, {:.1} s",
            m.oracle_photon_dev, m.oracle_first_order_dev, m.oracle_max_photons, m.oracle_seconds
        ),
    }
}

fn thermal_fixed_points(m: &Measured) -> Outcome {
    let worst = m.thermal_errors.iter().map(|&(a, b)| a.max(b)).fold(0.0, f64::max);
    Outcome {
        id: 2,
        name: "thermal fixed points (293 K, 25 mK)",
        pass: worst < 1e-8,
        detail: format!("max relative error {worst:.2e}"),
    }
}

fn occupation_value() -> Outcome {
    let n = thermal_occupation(TAU * 2.69e9, 293.0).unwrap();
    Outcome {
        id: 3,
        name: "thermal occupation at 2.69 GHz, 293 K",
        pass: (n - 2269.1).abs() <= 0.5,
        detail: format!("n_th = {n:.4}"),
    }
}

fn dicke_consistency() -> Outcome {
    let mut worst_ratio: f64 = 0.0;
    for n in [10.0, 1e3, 1e6] {
        for p in [0.0, 0.1, 0.35, 0.5, 0.8, 1.0] {
            let mut slots = [Complex64::new(0.0, 0.0); 12];
            slots[Slot::S22.index()] = Complex64::new(p, 0.0);
            slots[Slot::S22S22.index()] = Complex64::new(p * p, 0.0);
            let s = CumulantState::from_slots(slots);
            let a = dicke_from_population(p, n).unwrap();
            let b = dicke_from_cumulants(&s, n).unwrap();
            // Relative to the triangle size: near p = 1/2, J itself is only ~sqrt(N).
            let dev = (b.j - a.j).abs().max((a.m - b.m).abs()) / (0.5 * n);
            worst_ratio = worst_ratio.max(dev / (2.0 / n));
        }
    }
    let mut exact_dev: f64 = 0.0;
    let layout = HilbertLayout::new(4, 2).unwrap();
    for p in [0.0, 0.2, 0.5, 0.9] {
        let rho = DensityMatrix::thermal_product(layout, 0.0, p).unwrap();
        let om = moments(&rho);
        let a = dicke_from_population(p, 4.0).unwrap();
        let b = dicke_from_cumulants(&om.slots, 4.0).unwrap();
        exact_dev = exact_dev
            .max(rel(a.j * (a.j + 1.0), om.j_squared))
            .max(rel(b.j * b.j, om.j_squared))
            .max(rel(root_of_jj1(om.j_squared), a.j));
    }
    Outcome {
        id: 4,
        name: "Dicke formula consistency",
        pass: worst_ratio < 1.0 && exact_dev < 1e-9,
        detail: format!("worst deviation {worst_ratio:.3} x 2/N; N=4 vs exact <J^2>: {exact_dev:.1e}"),
    }
}

fn spectrum_structure(m: &Measured) -> Outcome {
    let p = &m.spectrum_peaks;
    let single = p[0].len() == 1 && p[0][0].abs() <= m.spectrum_step;
    let dip = m.spectrum_dips[1].iter().any(|&i| i.abs_diff(m.spectrum_centre) <= 2);
    let mut split_err = Vec::new();
    for k in [2, 3] {
        if p[k].len() == 2 {
            split_err.push(rel(p[k][1] - p[k][0], m.spectrum_predicted[k]));
        } else {
            split_err.push(f64::INFINITY);
        }
    }
    let pass = single && dip && split_err.iter().all(|&e| e < 0.1) && m.spectrum_converged && m.spectrum_seconds < 1800.0;
    Outcome {
        id: 5,
        name: "Rabi-splitting spectrum structure",
        pass,
        detail: format!(
            "eta 0: {} peak(s); eta 1e2: central dip {}; splitting errors {:.2}% / {:.2}% (eta 1e3 / 1e4); {:.1} s",
            p[0].len(),
            if dip { "present" } else { "absent" },
            100.0 * split_err[0],
            100.0 * split_err[1],
            m.spectrum_seconds
        ),
    }
}

fn rabi_structure(m: &Measured) -> Outcome {
    let no_osc = m.rabi_modulation[0] < 0.05;
    let f: Vec<f64> = m.rabi_measured[1..].iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    let monotone = f[0] < f[1] && f[1] < f[2];
    let errs: Vec<f64> = f.iter().zip(&m.rabi_predicted[1..]).map(|(a, b)| rel(*a, *b)).collect();
    let close = errs.iter().all(|&e| e < 0.1);
    Outcome {
        id: 6,
        name: "Rabi oscillation structure",
        pass: no_osc && monotone && close,
        detail: format!(
            "eta 0 modulation {:.3}; frequencies {:.3} / {:.3} / {:.3} MHz vs predicted {:.3} / {:.3} / {:.3} MHz",
            m.rabi_modulation[0],
            mhz(f[0]),
            mhz(f[1]),
            mhz(f[2]),
            mhz(m.rabi_predicted[1]),
            mhz(m.rabi_predicted[2]),
            mhz(m.rabi_predicted[3])
        ),
    }
}

fn superradiance_orderings(m: &Measured) -> Outcome {
    let peaks = m.burst_peaks.windows(2).all(|w| w[1] > w[0]);
    let shorter = m.durations.windows(2).all(|w| w[1] < w[0]);
    let plateau = m.plateaus.iter().all(|&p| (p - 0.5).abs() <= 0.05);
    let within3 = |t: Option<f64>, target: f64| t.is_some_and(|t| t >= target / 3.0 && t <= target * 3.0);
    let recool = within3(m.recool[0], 300e-6) && within3(m.recool[2], 4e-6);
    Outcome {
        id: 7,
        name: "superradiance orderings",
        pass: peaks && shorter && plateau && recool,
        detail: format!(
            "peaks increasing {peaks}, durations decreasing {shorter}; plateaus {:.3} / {:.3} / {:.3} (0.5 +- 0.05: {plateau}); \
             re-cooling {:.1} us at 1e4, {:.2} us at 1e6 (within x3: {recool})",
            m.plateaus[0],
            m.plateaus[1],
            m.plateaus[2],
            m.recool[0].unwrap_or(f64::NAN) * 1e6,
            m.recool[2].unwrap_or(f64::NAN) * 1e6
        ),
    }
}

fn sensing_identities(m: &Measured) -> Outcome {
    let errs: Vec<f64> = m.inferred.iter().map(|&(d, i)| i.map_or(f64::INFINITY, |i| (i - d).abs())).collect();
    let recovered = errs.iter().all(|&e| e <= m.sense_step);
    let minimum = m.resonant_min.abs() <= m.sweep_step;
    let shown: Vec<String> = m
        .inferred
        .iter()
        .map(|&(d, i)| format!("{:.2} -> {}", mhz(d), i.map_or("none".into(), |i| format!("{:.3}", mhz(i)))))
        .collect();
    Outcome {
        id: 8,
        name: "sensing identities",
        pass: recovered && minimum && m.sense_converged,
        detail: format!(
            "spin detuning recovery [{}] MHz (grid step {:.2} MHz); resonant minimum at {:.2} MHz",
            shown.join(", "),
            mhz(m.sense_step),
            mhz(m.resonant_min)
        ),
    }
}

/// Largest change of each reported quantity between the two tolerance
/// settings, compared with that quantity's own tolerance.
fn numerical_hygiene(a: &Measured, b: &Measured) -> Outcome {
    let mut checks: Vec<(&str, f64, f64)> = vec![
        ("oracle photon dev", (a.oracle_photon_dev - b.oracle_photon_dev).abs(), 0.05),
        ("oracle first-order dev", (a.oracle_first_order_dev - b.oracle_first_order_dev).abs(), 0.02),
    ];
    for (x, y) in a.thermal_errors.iter().zip(&b.thermal_errors) {
        checks.push(("thermal fixed point", (x.0 - y.0).abs().max((x.1 - y.1).abs()), 1e-8));
    }
    for (k, (x, y)) in a.spectrum_peaks.iter().zip(&b.spectrum_peaks).enumerate() {
        let same = x.len() == y.len();
        let shift = if same { x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max) } else { f64::INFINITY };
        checks.push(("spectrum peaks", shift, 0.1 * a.spectrum_predicted[k].max(a.spectrum_step)));
    }
    checks.push(("Rabi modulation", (a.rabi_modulation[0] - b.rabi_modulation[0]).abs(), 0.05));
    for (k, (x, y)) in a.rabi_measured.iter().zip(&b.rabi_measured).enumerate().skip(1) {
        let d = match (x, y) {
            (Some(u), Some(v)) => (u - v).abs(),
            _ => f64::INFINITY,
        };
        checks.push(("Rabi frequency", d, 0.1 * a.rabi_predicted[k]));
    }
    for (x, y) in a.plateaus.iter().zip(&b.plateaus) {
        checks.push(("plateau", (x - y).abs(), 0.05));
    }
    for (x, y) in a.burst_peaks.iter().zip(&b.burst_peaks) {
        // Orderings are the criterion; require changes far below the gaps.
        checks.push(("burst peak (relative)", rel(*y, *x), 0.01));
    }
    for (x, y) in a.durations.iter().zip(&b.durations) {
        checks.push(("pulse duration (relative)", rel(*y, *x), 0.01));
    }
    for (x, y) in a.recool.iter().zip(&b.recool) {
        let d = match (x, y) {
            (Some(u), Some(v)) => rel(*v, *u),
            _ => f64::INFINITY,
        };
        checks.push(("re-cooling time (relative)", d, 0.01));
    }
    for (x, y) in a.inferred.iter().zip(&b.inferred) {
        let d = match (x.1, y.1) {
            (Some(u), Some(v)) => (u - v).abs(),
            _ => f64::INFINITY,
        };
        checks.push(("inferred spin detuning", d, a.sense_step));
    }
    checks.push(("resonant minimum", (a.resonant_min - b.resonant_min).abs(), a.sweep_step));

    let worst = checks.iter().map(|(n, d, tol)| (n, d / tol)).fold(("", 0.0f64), |acc, (n, r)| if r > acc.1 { (n, r) } else { acc });
    let residue = a.residue.max(b.residue);
    Outcome {
        id: 9,
        name: "numerical hygiene",
        pass: residue < 1e-9 && worst.1 < 1.0,
        detail: format!(
            "max hermiticity residue {residue:.1e}; halving tolerances moves every quantity by at most {:.2e} of its tolerance (worst: {})",
            worst.1, worst.0
        ),
    }
}

fn main() -> ExitCode {
    let start = Instant::now();
    let base = measure(1.0);
    let half = measure(0.5);
    let outcomes = [
        oracle_equivalence(&base),
        thermal_fixed_points(&base),
        occupation_value(),
        dicke_consistency(),
        spectrum_structure(&base),
        rabi_structure(&base),
        superradiance_orderings(&base),
        sensing_identities(&base),
        numerical_hygiene(&base, &half),
    ];
    let mut unexpected = 0;
    for o in &outcomes {
        let known = KNOWN_FAILURES.contains(&o.id);
        let note = match (o.pass, known) {
            (false, true) => " [known failure, see README]",
            (true, true) => " [listed as known failure but passed]",
            _ => "",
        };
        if o.pass == known {
            unexpected += 1;
        }
        println!("{} {}: {}{} ({})", o.id, o.name, if o.pass { "PASS" } else { "FAIL" }, note, o.detail);
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("{passed}/{} criteria passed in {:.1} s", outcomes.len(), start.elapsed().as_secs_f64());
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
