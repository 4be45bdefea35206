use std::time::Instant;

use super::{parallel_map, ExperimentReport, ExperimentSpec, ReportBody};
use crate::cumulant::{single_spin_steady_population, thermal_equilibrium_state};
use crate::error::Result;
use crate::integrator::{integrate, uniform_grid};
use crate::model::{DriveProtocol, SystemParams};
use crate::oracle::{build_liouvillian, evolve_auto_cutoff, moments, DensityMatrix};
use crate::state::{CumulantState, Slot};

/// Exact moments below this magnitude are left out of relative deviations.
const SCALE_FLOOR: f64 = 1e-6;
/// Largest population allowed on the top Fock level.
const FOCK_TAIL: f64 = 1e-8;

/// Scaled-down resonant system whose field stays within a few Fock levels:
/// kappa = 1, g = 0.3, eta = 0.5, all at zero temperature.
pub fn oracle_params(n_spins: usize) -> SystemParams {
    SystemParams {
        omega_c: 50.0,
        kappa_c: 1.0,
        kappa_1: 0.5,
        omega_s: 50.0,
        gamma_s: 0.05,
        eta_s: 0.5,
        chi_s: 0.1,
        g_s: 0.3,
        n_spins: n_spins as f64,
        temperature: 0.0,
        omega_d: 50.0,
    }
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub n_spins: usize,
    pub drive_amplitude: f64,
    /// Closure-stress run: deviations are reported, not judged.
    pub report_only: bool,
    pub fock_cutoff: usize,
    pub times: Vec<f64>,
    pub cumulant: Vec<CumulantState>,
    pub exact: Vec<CumulantState>,
    /// Per slot, max over t > 0 of |exact - cumulant| / |exact|.
    pub max_relative_deviation: [f64; 12],
}

impl OracleRun {
    pub fn deviation(&self, slot: Slot) -> f64 {
        self.max_relative_deviation[slot.index()]
    }

    pub fn first_order_deviation(&self) -> f64 {
        [Slot::A, Slot::S12, Slot::S22].iter().map(|&s| self.deviation(s)).fold(0.0, f64::max)
    }

    pub fn max_exact_photon_number(&self) -> f64 {
        self.exact.iter().map(CumulantState::photon_number).fold(0.0, f64::max)
    }
}

/// Cumulant against exact Lindblad dynamics from the same
/// uncorrelated start for one spin count and drive.
pub fn compare_with_oracle(spec: &ExperimentSpec, n_spins: usize, drive_amplitude: f64) -> Result<OracleRun> {
    let params = SystemParams { n_spins: n_spins as f64, ..spec.params };
    let occ = params.occupancies()?;
    let duration = spec.tail_duration.unwrap_or(5.0 / params.kappa_c);
    let times = uniform_grid(duration, spec.samples);
    let initial = thermal_equilibrium_state(&params, &occ)?;
    let protocol = DriveProtocol::constant(drive_amplitude, duration)?;
    let traj = integrate(&initial, &params, &protocol, &spec.integration, &times)?;
    let pop = single_spin_steady_population(&params, &occ)?;
    let exact = evolve_auto_cutoff(n_spins, 4, FOCK_TAIL, &times, &spec.integration, |layout| {
        Ok((DensityMatrix::thermal_product(layout, occ.n_c_th, pop)?, build_liouvillian(&params, layout, drive_amplitude)?))
    })?;
    let fock_cutoff = exact[0].layout().fock_cutoff();
    let exact: Vec<CumulantState> = exact.iter().map(|r| moments(r).slots).collect();
    let mut dev = [0.0f64; 12];
    for (e, c) in exact.iter().zip(&traj.states).skip(1) {
        for s in Slot::ALL {
            let (x, y) = (e.get(s), c.get(s));
            if x.norm() > SCALE_FLOOR {
                dev[s.index()] = dev[s.index()].max((x - y).norm() / x.norm());
            }
        }
    }
    Ok(OracleRun {
        n_spins,
        drive_amplitude,
        report_only: false,
        fock_cutoff,
        times: traj.times,
        cumulant: traj.states,
        exact,
        max_relative_deviation: dev,
    })
}

/// Weak-drive comparison for each configured spin count, plus an optional
/// strong-drive run for two spins.
pub fn run_oracle_comparison(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let mut jobs: Vec<(usize, f64, bool)> = spec.oracle_spins.iter().map(|&n| (n, spec.drive_amplitude, false)).collect();
    if let Some(strong) = spec.strong_drive_amplitude {
        jobs.push((2, strong, true));
    }
    let runs = parallel_map(spec.workers, jobs, |(n, amp, report_only)| {
        compare_with_oracle(spec, n, amp).map(|r| OracleRun { report_only, ..r })
    })?;
    let max_hermiticity_residue = runs
        .iter()
        .flat_map(|r| r.cumulant.iter())
        .map(CumulantState::hermiticity_residue)
        .fold(0.0, f64::max);
    Ok(ExperimentReport {
        preset: spec.preset,
        body: ReportBody::OracleComparison(runs),
        points: Vec::new(),
        max_hermiticity_residue,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
