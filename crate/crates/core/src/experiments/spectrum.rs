use std::time::Instant;

use super::{number_label, parallel_map, ExperimentReport, ExperimentSpec, PointStatus, ReportBody};
use crate::cumulant::{dicke_from_cumulants, thermal_equilibrium_state};
use crate::error::Result;
use crate::hybrid::{find_dips, find_peaks, hybrid_mode_frequencies, infer_spin_frequency, HybridModes, SpectrumPeaks};
use crate::integrator::{steady_state, SteadyStateConfig, SteadyStateResult};
use crate::model::SystemParams;
use crate::state::CumulantState;

/// Minimum depth of a central dip, relative to the global maximum.
const DIP_DEPTH: f64 = 0.01;

/// Warm-started chain of steady states: point k starts from the state of
/// point k - 1.
pub fn steady_sweep<F>(
    initial: &CumulantState,
    grid: &[f64],
    params_at: F,
    drive_amplitude: f64,
    config: &SteadyStateConfig,
) -> Result<Vec<SteadyStateResult>>
where
    F: Fn(f64) -> SystemParams,
{
    let mut state = *initial;
    let mut out = Vec::with_capacity(grid.len());
    for &x in grid {
        let r = steady_state(&state, &params_at(x), drive_amplitude, config)?;
        state = r.state;
        out.push(r);
    }
    Ok(out)
}

/// Steady photon number versus drive detuning omega_d - omega_c.
#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub eta_s: f64,
    /// omega_s - omega_c.
    pub spin_detuning: f64,
    pub drive_detunings: Vec<f64>,
    pub photon_numbers: Vec<f64>,
    pub states: Vec<CumulantState>,
    /// J of the steady state driven closest to the cavity frequency.
    pub j_ss: f64,
    /// Hybrid modes relative to omega_c for `j_ss`.
    pub predicted: HybridModes,
    pub peaks: SpectrumPeaks,
    /// Indices of dips between maxima.
    pub dips: Vec<usize>,
    /// Spin detuning recovered from the peak positions, when there are two.
    pub inferred_spin_detuning: Option<f64>,
}

/// Steady photon number versus spin detuning at a fixed drive frequency.
#[derive(Debug, Clone)]
pub struct TransmissionCurve {
    pub eta_s: f64,
    /// omega_d - omega_c.
    pub drive_offset: f64,
    pub spin_detunings: Vec<f64>,
    pub photon_numbers: Vec<f64>,
    /// Grid index of the smallest photon number.
    pub min_index: usize,
}

#[derive(Debug, Clone)]
pub struct SensingReport {
    pub spectra: Vec<SpectrumRun>,
    pub curves: Vec<TransmissionCurve>,
}

fn spectrum(spec: &ExperimentSpec, eta_s: f64, spin_detuning: f64) -> Result<(SpectrumRun, Vec<SteadyStateResult>)> {
    let mut base = spec.params_at_eta(eta_s);
    base.omega_s = base.omega_c + spin_detuning;
    let initial = thermal_equilibrium_state(&base, &base.occupancies()?)?;
    let grid = &spec.drive_detunings;
    let results = steady_sweep(
        &initial,
        grid,
        |x| SystemParams { omega_d: base.omega_c + x, ..base },
        spec.drive_amplitude,
        &spec.steady,
    )?;
    let photon_numbers: Vec<f64> = results.iter().map(|r| r.state.photon_number()).collect();
    let centre = grid
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    let j_ss = dicke_from_cumulants(&results[centre].state, base.n_spins)?.j;
    let peaks = find_peaks(grid, &photon_numbers)?;
    let run = SpectrumRun {
        eta_s,
        spin_detuning,
        drive_detunings: grid.clone(),
        predicted: hybrid_mode_frequencies(spin_detuning, 0.0, base.g_s, j_ss)?,
        dips: find_dips(&photon_numbers, DIP_DEPTH),
        inferred_spin_detuning: infer_spin_frequency(&peaks, 0.0).ok(),
        peaks,
        photon_numbers,
        states: results.iter().map(|r| r.state).collect(),
        j_ss,
    };
    Ok((run, results))
}

fn transmission(spec: &ExperimentSpec, eta_s: f64, drive_offset: f64) -> Result<(TransmissionCurve, Vec<SteadyStateResult>)> {
    let mut base = spec.params_at_eta(eta_s);
    base.omega_d = base.omega_c + drive_offset;
    let grid = &spec.spin_sweep;
    let first = SystemParams { omega_s: base.omega_c + grid[0], ..base };
    let initial = thermal_equilibrium_state(&first, &first.occupancies()?)?;
    let results = steady_sweep(
        &initial,
        grid,
        |x| SystemParams { omega_s: base.omega_c + x, ..base },
        spec.drive_amplitude,
        &spec.steady,
    )?;
    let photon_numbers: Vec<f64> = results.iter().map(|r| r.state.photon_number()).collect();
    let min_index = photon_numbers
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(k, _)| k)
        .unwrap_or(0);
    Ok((TransmissionCurve { eta_s, drive_offset, spin_detunings: grid.clone(), photon_numbers, min_index }, results))
}

fn statuses(curve: &str, results: &[SteadyStateResult]) -> Vec<PointStatus> {
    results.iter().enumerate().map(|(k, r)| PointStatus::of(curve, k, r)).collect()
}

fn residue(results: &[SteadyStateResult]) -> f64 {
    results.iter().map(|r| r.state.hermiticity_residue()).fold(0.0, f64::max)
}

/// Label of a spectrum curve, also used for its file name.
pub fn spectrum_label(eta_s: f64, spin_detuning: Option<f64>) -> String {
    match spin_detuning {
        None => format!("eta_{}", number_label(eta_s)),
        Some(d) => format!("eta_{}_spin_detuning_{}", number_label(eta_s), number_label(d / crate::constants::TAU)),
    }
}

pub fn transmission_label(eta_s: f64, drive_offset: f64) -> String {
    format!("eta_{}_drive_offset_{}", number_label(eta_s), number_label(drive_offset / crate::constants::TAU))
}

/// One warm-started drive-frequency sweep per eta, chains in parallel.
pub fn run_rabi_spectrum(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let spin_detuning = spec.params.omega_s - spec.params.omega_c;
    let out = parallel_map(spec.workers, spec.eta_values.clone(), |eta| spectrum(spec, eta, spin_detuning))?;
    let mut points = Vec::new();
    let mut max_residue: f64 = 0.0;
    let mut runs = Vec::with_capacity(out.len());
    for (run, results) in out {
        points.extend(statuses(&spectrum_label(run.eta_s, None), &results));
        max_residue = max_residue.max(residue(&results));
        runs.push(run);
    }
    Ok(ExperimentReport {
        preset: spec.preset,
        body: ReportBody::RabiSpectrum(runs),
        points,
        max_hermiticity_residue: max_residue,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

enum SensingJob {
    Spectrum(f64, f64),
    Transmission(f64, f64),
}

enum SensingOut {
    Spectrum(SpectrumRun, Vec<SteadyStateResult>),
    Transmission(TransmissionCurve, Vec<SteadyStateResult>),
}

/// Drive-frequency spectra at fixed spin detunings (with the frequency-sum
/// inversion) and spin-detuning curves at fixed drive frequencies, for each eta.
/// Either family is skipped when its grids are empty.
pub fn run_sensing(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    spec.validate()?;
    let start = Instant::now();
    let mut jobs = Vec::new();
    for &eta in &spec.eta_values {
        if !spec.drive_detunings.is_empty() {
            jobs.extend(spec.spin_detunings.iter().map(|&d| SensingJob::Spectrum(eta, d)));
        }
        if !spec.spin_sweep.is_empty() {
            jobs.extend(spec.drive_offsets.iter().map(|&o| SensingJob::Transmission(eta, o)));
        }
    }
    let out = parallel_map(spec.workers, jobs, |job| match job {
        SensingJob::Spectrum(eta, d) => spectrum(spec, eta, d).map(|(r, s)| SensingOut::Spectrum(r, s)),
        SensingJob::Transmission(eta, o) => transmission(spec, eta, o).map(|(c, s)| SensingOut::Transmission(c, s)),
    })?;
    let mut report = SensingReport { spectra: Vec::new(), curves: Vec::new() };
    let mut points = Vec::new();
    let mut max_residue: f64 = 0.0;
    for o in out {
        match o {
            SensingOut::Spectrum(run, results) => {
                points.extend(statuses(&spectrum_label(run.eta_s, Some(run.spin_detuning)), &results));
                max_residue = max_residue.max(residue(&results));
                report.spectra.push(run);
            }
            SensingOut::Transmission(curve, results) => {
                points.extend(statuses(&transmission_label(curve.eta_s, curve.drive_offset), &results));
                max_residue = max_residue.max(residue(&results));
                report.curves.push(curve);
            }
        }
    }
    Ok(ExperimentReport {
        preset: spec.preset,
        body: ReportBody::Sensing(report),
        points,
        max_hermiticity_residue: max_residue,
        wall_time: start.elapsed().as_secs_f64(),
    })
}
