//! Steady states under constant drive.
//!
//! The state is integrated window by window. Convergence needs both a small
//! windowed relative change on every slot and a small scaled residual
//! |f_i| / max(|y_i|, floor). Once the transient has mostly died out a Newton
//! solve on the right-hand side (finite-difference Jacobian) jumps over slow
//! spin relaxation; its answer is only accepted if the Jacobian there is
//! stable and a further integrated window confirms it.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{Dopri5, IntegrationConfig};
use crate::cumulant::MeanFieldRhs;
use crate::error::{Error, IntegrationError, IntegrationFailure, Result};
use crate::model::{population_relaxation_rate, SystemParams};
use crate::state::{CumulantState, Slot};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateConfig {
    pub integration: IntegrationConfig,
    /// Windowed relative change required on every slot.
    pub rel_tol: f64,
    /// Window length in seconds; `None` means 10/kappa_c.
    pub window: Option<f64>,
    /// Model-time cap in seconds; `None` picks it from the slowest rate.
    pub max_time: Option<f64>,
    /// Slot magnitudes below this are judged absolutely.
    pub scale_floor: f64,
    /// Any slot magnitude above this counts as divergence.
    pub divergence_bound: f64,
    /// Try a Newton solve once the windowed change is below `polish_trigger`.
    pub polish: bool,
    pub polish_trigger: f64,
}

impl Default for SteadyStateConfig {
    fn default() -> Self {
        SteadyStateConfig {
            // The windowed criterion is only meaningful well above the
            // integrator's own drift per window.
            integration: IntegrationConfig { rel_tol: 1e-12, abs_tol: 1e-16, ..IntegrationConfig::default() },
            rel_tol: 1e-8,
            window: None,
            max_time: None,
            scale_floor: 1e-10,
            divergence_bound: 1e30,
            polish: true,
            polish_trigger: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SteadyStatus {
    Converged,
    /// The model-time cap was hit; the state may be a limit cycle or slow drift.
    TimeCapReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateResult {
    pub state: CumulantState,
    /// max_i |f_i| / max(|y_i|, floor), in 1/s.
    pub residual_norm: f64,
    /// Integrated model time, in seconds.
    pub elapsed_model_time: f64,
    pub converged: bool,
    pub status: SteadyStatus,
    /// Windowed relative change over the last window.
    pub windowed_change: f64,
    pub windows: usize,
    pub newton_steps: usize,
}

/// Model parameters needed to size windows and caps.
fn time_scales(params: &SystemParams, cfg: &SteadyStateConfig) -> Result<(f64, f64)> {
    let occ = params.occupancies()?;
    let relax = population_relaxation_rate(params, &occ);
    let window = match cfg.window {
        Some(w) if w > 0.0 && w.is_finite() => w,
        Some(w) => return Err(Error::param("window", format!("{w} must be positive"))),
        None if params.kappa_c > 0.0 => 10.0 / params.kappa_c,
        None => return Err(Error::param("kappa_c", "default window needs kappa_c > 0")),
    };
    let cap = match cfg.max_time {
        Some(t) if t > 0.0 => t,
        Some(t) => return Err(Error::param("max_time", format!("{t} must be positive"))),
        None => {
            let rates = [params.kappa_c, relax, relax + 2.0 * params.chi_s];
            let slowest = rates.iter().copied().filter(|&r| r > 0.0).fold(f64::INFINITY, f64::min);
            if !slowest.is_finite() {
                return Err(Error::UndampedSpin);
            }
            let floor = if relax > 0.0 { 10.0 / relax } else { 0.0 };
            (50.0 / slowest).max(floor)
        }
    };
    Ok((window, cap.max(window)))
}

fn slot_scale(y: Complex64, floor: f64) -> f64 {
    y.norm().max(floor)
}

fn windowed_change(old: &[Complex64], new: &[Complex64], floor: f64) -> f64 {
    old.iter()
        .zip(new)
        .map(|(a, b)| (b - a).norm() / slot_scale(*b, floor))
        .fold(0.0, f64::max)
}

/// Scaled residual max_i |f_i(y)| / max(|y_i|, floor), in 1/s.
pub fn scaled_residual(rhs: &MeanFieldRhs, y: &[Complex64], floor: f64) -> f64 {
    let f = rhs.eval(y);
    f.iter().zip(y).map(|(fi, yi)| fi.norm() / slot_scale(*yi, floor)).fold(0.0, f64::max)
}

/// Real unknowns: re and im of every slot except the im of the four
/// hermitian slots, which stay exactly zero.
fn unknown_map() -> Vec<(usize, bool)> {
    let mut map = Vec::with_capacity(20);
    for slot in Slot::ALL {
        map.push((slot.index(), false));
        if !Slot::REAL.contains(&slot) {
            map.push((slot.index(), true));
        }
    }
    map
}

fn component(z: Complex64, imag: bool) -> f64 {
    if imag {
        z.im
    } else {
        z.re
    }
}

fn add_component(z: &mut Complex64, imag: bool, v: f64) {
    if imag {
        z.im += v;
    } else {
        z.re += v;
    }
}

/// Result of a Newton solve on the mean-field right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOutcome {
    pub state: [Complex64; 12],
    pub residual_norm: f64,
    pub iterations: usize,
    /// Largest real part of the Jacobian spectrum at the solution, in 1/s.
    pub max_growth_rate: f64,
    /// Magnitude of the largest eigenvalue, for judging `max_growth_rate`.
    pub spectral_radius: f64,
}

impl NewtonOutcome {
    /// Linearly stable up to finite-difference noise.
    pub fn is_stable(&self) -> bool {
        self.max_growth_rate < 1e-9 * self.spectral_radius
    }
}

/// Scaled Jacobian d(f_i/s_i)/d(u_j) with y_j = s_j u_j, by central differences.
fn scaled_jacobian(rhs: &MeanFieldRhs, y: &[Complex64; 12], scales: &[f64; 12]) -> DMatrix<f64> {
    let map = unknown_map();
    let n = map.len();
    let mut jac = DMatrix::zeros(n, n);
    let h = f64::EPSILON.cbrt();
    for (col, &(slot, imag)) in map.iter().enumerate() {
        let step = h * scales[slot];
        let mut yp = *y;
        let mut ym = *y;
        add_component(&mut yp[slot], imag, step);
        add_component(&mut ym[slot], imag, -step);
        let fp = rhs.eval(&yp);
        let fm = rhs.eval(&ym);
        for (row, &(rs, rimag)) in map.iter().enumerate() {
            let d = component(fp[rs], rimag) - component(fm[rs], rimag);
            jac[(row, col)] = d / (2.0 * h * scales[rs]);
        }
    }
    jac
}

/// Damped Newton iteration for f(y) = 0 starting from `y0`.
pub fn newton_fixed_point(
    rhs: &MeanFieldRhs,
    y0: &[Complex64; 12],
    floor: f64,
    residual_tol: f64,
    max_iterations: usize,
) -> Option<NewtonOutcome> {
    let map = unknown_map();
    let mut y = *y0;
    for slot in Slot::REAL {
        y[slot.index()].im = 0.0;
    }
    let mut scales = [0.0; 12];
    for (s, v) in scales.iter_mut().zip(&y) {
        *s = slot_scale(*v, floor);
    }
    let scaled_f = |y: &[Complex64; 12], scales: &[f64; 12]| -> DVector<f64> {
        let f = rhs.eval(y);
        DVector::from_iterator(map.len(), map.iter().map(|&(s, im)| component(f[s], im) / scales[s]))
    };
    let mut f = scaled_f(&y, &scales);
    let mut iterations = 0;
    while iterations < max_iterations {
        let res = scaled_residual(rhs, &y, floor);
        if res <= residual_tol {
            break;
        }
        iterations += 1;
        let jac = scaled_jacobian(rhs, &y, &scales);
        let step = jac.full_piv_lu().solve(&(-&f))?;
        if step.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let norm0 = f.norm();
        let mut lambda = 1.0;
        loop {
            let mut trial = y;
            for (k, &(slot, imag)) in map.iter().enumerate() {
                add_component(&mut trial[slot], imag, lambda * step[k] * scales[slot]);
            }
            let ft = scaled_f(&trial, &scales);
            if ft.iter().all(|v| v.is_finite()) && ft.norm() < norm0 * (1.0 - 1e-4 * lambda) {
                y = trial;
                f = ft;
                break;
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return None;
            }
        }
        if y[Slot::S22.index()].re < -1e-9 || y[Slot::S22.index()].re > 1.0 + 1e-9 {
            return None;
        }
    }
    let residual_norm = scaled_residual(rhs, &y, floor);
    if !(residual_norm <= residual_tol) {
        return None;
    }
    for (s, v) in scales.iter_mut().zip(&y) {
        *s = slot_scale(*v, floor);
    }
    let eig = scaled_jacobian(rhs, &y, &scales).complex_eigenvalues();
    let max_growth_rate = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let spectral_radius = eig.iter().map(|l| l.norm()).fold(0.0, f64::max);
    Some(NewtonOutcome { state: y, residual_norm, iterations, max_growth_rate, spectral_radius })
}

fn diverged(t: f64, steps: usize, y: &[Complex64]) -> Error {
    Error::Integration(IntegrationError {
        kind: IntegrationFailure::Diverged,
        time: t,
        steps,
        last_state: y.to_vec(),
    })
}

/// Relaxes `initial` under constant drive `drive_amplitude` to a steady state.
pub fn steady_state(
    initial: &CumulantState,
    params: &SystemParams,
    drive_amplitude: f64,
    config: &SteadyStateConfig,
) -> Result<SteadyStateResult> {
    params.validate()?;
    config.integration.validate()?;
    if !(config.rel_tol > 0.0 && config.rel_tol < 1.0) {
        return Err(Error::param("rel_tol", "must lie in (0, 1)"));
    }
    if !initial.is_finite() {
        return Err(Error::NonFiniteState);
    }
    let occ = params.occupancies()?;
    let rhs = MeanFieldRhs::new(params, &occ, drive_amplitude);
    let (window, cap) = time_scales(params, config)?;
    let floor = config.scale_floor;
    let residual_tol = config.rel_tol / window;

    let mut y = *initial.slots();
    let mut stepper = Dopri5::new(config.integration, 12);
    let mut elapsed = 0.0;
    let mut windows = 0;
    let mut newton_steps = 0;
    // Failed Newton attempts back off exponentially in windows.
    let mut skip = 0usize;
    let mut failures = 0u32;

    // A start whose slots would change by less than their own size over one
    // window (a warm start from a neighbouring sweep point) goes straight to
    // Newton.
    if config.polish && scaled_residual(&rhs, &y, floor) * window <= 1.0 {
        if let Some(out) = newton_fixed_point(&rhs, &y, floor, 0.1 * residual_tol, 30) {
            newton_steps += out.iterations;
            if out.is_stable() {
                y = out.state;
            }
        }
    }

    loop {
        let start = y;
        let start_residual = scaled_residual(&rhs, &start, floor);
        stepper.advance(&rhs, elapsed, elapsed + window, &mut y, &[], |_, _| {})?;
        elapsed += window;
        windows += 1;
        if y.iter().any(|z| z.norm() > config.divergence_bound) {
            return Err(diverged(elapsed, stepper.stats.accepted, &y));
        }
        let change = windowed_change(&start, &y, floor);
        let end_residual = scaled_residual(&rhs, &y, floor);
        let finish = |state: [Complex64; 12], residual: f64, status: SteadyStatus| SteadyStateResult {
            state: CumulantState::from_slots(state),
            residual_norm: residual,
            elapsed_model_time: elapsed,
            converged: status == SteadyStatus::Converged,
            status,
            windowed_change: change,
            windows,
            newton_steps,
        };
        if change <= config.rel_tol {
            // The window start may be a Newton point the integrator only
            // confirmed; integrated states carry integrator-level error.
            if start_residual <= residual_tol {
                return Ok(finish(start, start_residual, SteadyStatus::Converged));
            }
            if end_residual <= residual_tol {
                return Ok(finish(y, end_residual, SteadyStatus::Converged));
            }
        }
        if elapsed >= cap {
            return Ok(finish(y, end_residual, SteadyStatus::TimeCapReached));
        }
        if config.polish && change <= config.polish_trigger {
            if skip > 0 {
                skip -= 1;
                continue;
            }
            match newton_fixed_point(&rhs, &y, floor, 0.1 * residual_tol, 30) {
                Some(out) if out.is_stable() => {
                    newton_steps += out.iterations;
                    y = out.state;
                    stepper.restart();
                    failures = 0;
                }
                other => {
                    newton_steps += other.map_or(0, |o| o.iterations);
                    failures = (failures + 1).min(16);
                    skip = (1usize << failures) - 1;
                }
            }
        }
    }
}
