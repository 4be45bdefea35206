use std::time::Instant;

use num_complex::Complex64;

use super::signal::{envelope_modulation, oscillation_frequency, pulse_metrics, PulseMetrics};
use super::{parallel_map, ExperimentReport, ExperimentSpec, ReportBody};
use crate::cumulant::{dicke_from_cumulants, thermal_equilibrium_state};
use crate::error::Result;
use crate::integrator::{integrate, uniform_grid, Trajectory};
use crate::model::{population_relaxation_rate, DriveProtocol, SystemParams};
use crate::state::Slot;

/// Square-pulse response of the Rabi scenario at one cooling rate.
#[derive(Debug, Clone)]
pub struct TransientRun {
    pub eta_s: f64,
    pub drive_end: f64,
    pub trajectory: Trajectory,
    /// J of the cooled equilibrium the run starts from.
    pub j_ss: f64,
    /// sqrt(2 J_ss) g_s.
    pub predicted_frequency: f64,
    /// Oscillation frequency of <a> during the pulse.
    pub measured_frequency: Option<f64>,
    /// Photon-number envelope modulation during the pulse, relative to its peak.
    pub envelope_modulation: f64,
}

/// Superradiant pulse at one cooling rate.
#[derive(Debug, Clone)]
pub struct PulseRun {
    pub eta_s: f64,
    pub trajectory: Trajectory,
    pub metrics: Option<PulseMetrics>,
}

struct Pulsed {
    params: SystemParams,
    j_eq: f64,
    drive_end: f64,
    trajectory: Trajectory,
}

fn pulsed(spec: &ExperimentSpec, eta_s: f64, tail: f64, grid: impl Fn(f64) -> Vec<f64>) -> Result<Pulsed> {
    let params = spec.params_at_eta(eta_s);
    let occ = params.occupancies()?;
    let initial = thermal_equilibrium_state(&params, &occ)?;
    let protocol = DriveProtocol::square_pulse(spec.drive_amplitude, spec.pulse_duration, tail)?;
    let times = grid(protocol.total_duration());
    let trajectory = integrate(&initial, &params, &protocol, &spec.integration, &times)?;
    Ok(Pulsed {
        params,
        j_eq: dicke_from_cumulants(&initial, params.n_spins)?.j,
        drive_end: spec.pulse_duration,
        trajectory,
    })
}

fn residue(trajectories: &[&Trajectory]) -> f64 {
    trajectories.iter().map(|t| t.stats.max_hermiticity_residue).fold(0.0, f64::max)
}

/// Photon number, field and Dicke tracks under a square pulse for each eta.
pub fn run_rabi_transient(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let tail = spec.tail_duration.unwrap_or(2.0 * spec.pulse_duration);
    let runs = parallel_map(spec.workers, spec.eta_values.clone(), |eta_s| {
        let run = pulsed(spec, eta_s, tail, |total| uniform_grid(total, spec.samples))?;
        let traj = &run.trajectory;
        let in_pulse = traj.times.partition_point(|&t| t <= run.drive_end);
        let field: Vec<Complex64> = traj.states[..in_pulse].iter().map(|s| s.get(Slot::A)).collect();
        // The field rings about its driven value, approximated by the value at pulse end.
        let centre = field[in_pulse - 1];
        let photons = traj.photon_numbers();
        Ok(TransientRun {
            eta_s,
            drive_end: run.drive_end,
            j_ss: run.j_eq,
            predicted_frequency: (2.0 * run.j_eq).sqrt() * run.params.g_s,
            measured_frequency: oscillation_frequency(&traj.times[..in_pulse], &field, centre),
            envelope_modulation: envelope_modulation(&photons[..in_pulse]),
            trajectory: run.trajectory,
        })
    })?;
    let max_hermiticity_residue = residue(&runs.iter().map(|r| &r.trajectory).collect::<Vec<_>>());
    Ok(ExperimentReport {
        preset: spec.preset,
        body: ReportBody::RabiTransient(runs),
        points: Vec::new(),
        max_hermiticity_residue,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Sample times resolving the drive and emission (`fine` points over the
/// first 5 us) followed by a coarse re-cooling tail.
pub fn pulse_grid(total: f64, fine: usize) -> Vec<f64> {
    const FINE_SPAN: f64 = 5e-6;
    const COARSE: usize = 2000;
    let split = FINE_SPAN.min(total);
    let mut grid = uniform_grid(split, fine);
    if total > split {
        grid.extend((1..=COARSE).map(|k| split + (total - split) * k as f64 / COARSE as f64));
    }
    grid
}

/// Drive, emission and re-cooling phases for each eta. Without a configured
/// tail the run lasts the pulse plus 12 population relaxation times.
pub fn run_superradiance(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let runs = parallel_map(spec.workers, spec.eta_values.clone(), |eta_s| {
        let p = spec.params_at_eta(eta_s);
        let tail = match spec.tail_duration {
            Some(t) => t,
            None => 12.0 / population_relaxation_rate(&p, &p.occupancies()?),
        };
        let run = pulsed(spec, eta_s, tail, |total| pulse_grid(total, spec.samples))?;
        let traj = &run.trajectory;
        let j: Vec<f64> = traj.dicke.iter().map(|d| d.j).collect();
        let metrics = pulse_metrics(
            &traj.times,
            &traj.photon_numbers(),
            &traj.upper_populations(),
            &j,
            run.drive_end,
            run.j_eq,
        );
        Ok(PulseRun { eta_s, metrics, trajectory: run.trajectory })
    })?;
    let max_hermiticity_residue = residue(&runs.iter().map(|r| &r.trajectory).collect::<Vec<_>>());
    Ok(ExperimentReport {
        preset: spec.preset,
        body: ReportBody::Superradiance(runs),
        points: Vec::new(),
        max_hermiticity_residue,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
