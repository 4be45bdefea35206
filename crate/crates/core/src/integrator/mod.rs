//! Adaptive time stepping of the mean-field equations over piecewise drive
//! protocols, and the steady-state engine used by frequency sweeps.

mod dopri;
mod steady;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use dopri::{Dopri5, OdeSystem, StepStats};
pub use steady::{newton_fixed_point, scaled_residual, NewtonOutcome, steady_state, SteadyStateConfig, SteadyStateResult, SteadyStatus};

use crate::cumulant::{dicke_from_cumulants, MeanFieldRhs, ProtocolRhs};
use crate::error::{Error, Result};
use crate::model::{DriveProtocol, SystemParams};
use crate::state::{CumulantState, DickeCoordinates};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Seconds; the default f64::MAX leaves steps unbounded.
    pub max_step: f64,
    /// Seconds; 0 selects the step automatically.
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        IntegrationConfig {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_step: f64::MAX,
            initial_step: 0.0,
            max_steps: 20_000_000,
        }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::param(name, format!("{v} must lie in (0, 1)")));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::param("max_steps", "must be > 0"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::param("max_step", "must be > 0"));
        }
        if !(self.initial_step >= 0.0) || !self.initial_step.is_finite() {
            return Err(Error::param("initial_step", "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        IntegrationConfig { rel_tol: self.rel_tol * factor, abs_tol: self.abs_tol * factor, ..*self }
    }
}

impl OdeSystem for MeanFieldRhs {
    fn dim(&self) -> usize {
        12
    }

    fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        dy.copy_from_slice(&self.eval(y));
    }
}

/// Sampled mean-field trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<CumulantState>,
    pub dicke: Vec<DickeCoordinates>,
    pub stats: TrajectoryStats,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
    /// Largest |Im| of the hermitian slots seen at any sample (relative to max(1, |Re|)).
    pub max_hermiticity_residue: f64,
}

impl Trajectory {
    pub fn photon_numbers(&self) -> Vec<f64> {
        self.states.iter().map(CumulantState::photon_number).collect()
    }

    pub fn upper_populations(&self) -> Vec<f64> {
        self.states.iter().map(CumulantState::upper_population).collect()
    }

    pub fn last(&self) -> Option<&CumulantState> {
        self.states.last()
    }
}

fn check_grid(grid: &[f64], total: f64) -> Result<()> {
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::param("sample_grid", "times must be strictly increasing"));
        }
    }
    if let (Some(&first), Some(&last)) = (grid.first(), grid.last()) {
        if first < 0.0 || last > total * (1.0 + 1e-12) {
            return Err(Error::param("sample_grid", format!("samples must lie in [0, {total:e}]")));
        }
    }
    Ok(())
}

/// Integrates the mean-field equations across every segment of `protocol`,
/// restarting the stepper at each boundary, and samples the state at
/// `sample_grid` (seconds from protocol start).
pub fn integrate(
    initial: &CumulantState,
    params: &SystemParams,
    protocol: &DriveProtocol,
    config: &IntegrationConfig,
    sample_grid: &[f64],
) -> Result<Trajectory> {
    config.validate()?;
    if !initial.is_finite() {
        return Err(Error::NonFiniteState);
    }
    let total = protocol.total_duration();
    check_grid(sample_grid, total)?;
    let rhs = ProtocolRhs::new(params, protocol.clone())?;
    let n_spins = params.n_spins;

    let mut times = Vec::with_capacity(sample_grid.len());
    let mut states = Vec::with_capacity(sample_grid.len());
    let mut y = initial.as_slice().to_vec();
    let mut stepper = Dopri5::new(*config, 12);
    let mut grid = sample_grid;
    while let Some((&t, rest)) = grid.split_first() {
        if t > 0.0 {
            break;
        }
        times.push(t);
        states.push(*initial);
        grid = rest;
    }

    let spans = protocol.spans();
    let last_index = spans.len() - 1;
    for (idx, &(start, end, amplitude)) in spans.iter().enumerate() {
        let end = if idx == last_index { end.max(grid.last().copied().unwrap_or(end)) } else { end };
        let split = grid.partition_point(|&t| t <= end);
        let (seg_samples, rest) = grid.split_at(split);
        grid = rest;
        let sys = rhs.segment_rhs(amplitude);
        stepper.restart();
        stepper.advance(&sys, start, end, &mut y, seg_samples, |t, v| {
            times.push(t);
            states.push(CumulantState::from_slice(v));
        })?;
        if y.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteState);
        }
    }

    let mut dicke = Vec::with_capacity(states.len());
    let mut residue: f64 = 0.0;
    for s in &states {
        residue = residue.max(s.hermiticity_residue());
        dicke.push(dicke_from_cumulants(s, n_spins)?);
    }
    Ok(Trajectory {
        times,
        states,
        dicke,
        stats: TrajectoryStats {
            accepted_steps: stepper.stats.accepted,
            rejected_steps: stepper.stats.rejected,
            evaluations: stepper.stats.evaluations,
            max_hermiticity_residue: residue,
        },
    })
}

/// Evenly spaced grid of `count` samples over [0, t_end], both ends included.
pub fn uniform_grid(t_end: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|k| t_end * k as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::TAU;
    use crate::cumulant::thermal_equilibrium_state;
    use crate::state::Slot;

    fn uncoupled() -> SystemParams {
        let mut p = SystemParams::fig3();
        p.g_s = 0.0;
        p
    }

    #[test]
    fn only_t0_sample_returns_initial() {
        let p = SystemParams::fig3();
        let s = thermal_equilibrium_state(&p, &p.occupancies().unwrap()).unwrap();
        let proto = DriveProtocol::constant(0.0, 1e-6).unwrap();
        let tr = integrate(&s, &p, &proto, &IntegrationConfig::default(), &[0.0]).unwrap();
        assert_eq!(tr.states, vec![s]);
        assert_eq!(tr.times, vec![0.0]);
    }

    #[test]
    fn uncoupled_photon_relaxation_matches_closed_form() {
        let p = uncoupled();
        let occ = p.occupancies().unwrap();
        let n0 = 5.0 * occ.n_c_th;
        let s = thermal_equilibrium_state(&p, &occ).unwrap().with(Slot::AdA, Complex64::new(n0, 0.0));
        let t_end = 5.0 / p.kappa_c;
        let proto = DriveProtocol::constant(0.0, t_end).unwrap();
        let grid = uniform_grid(t_end, 101);
        let tr = integrate(&s, &p, &proto, &IntegrationConfig::default(), &grid).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            let exact = occ.n_c_th + (n0 - occ.n_c_th) * (-p.kappa_c * t).exp();
            assert!((st.photon_number() - exact).abs() <= 1e-6 * exact, "t={t}");
        }
    }

    #[test]
    fn spin_population_relaxation_matches_closed_form() {
        let mut p = uncoupled();
        p.eta_s = 1e4;
        let occ = p.occupancies().unwrap();
        let rate = crate::model::population_relaxation_rate(&p, &occ);
        let p_eq = occ.n_s_th * p.gamma_s / rate;
        let p0 = 0.45;
        let s = CumulantState::vacuum()
            .with(Slot::S22, Complex64::new(p0, 0.0))
            .with(Slot::S22S22, Complex64::new(p0 * p0, 0.0))
            .with(Slot::AdA, Complex64::new(occ.n_c_th, 0.0));
        let t_end = 3.0 / rate;
        let proto = DriveProtocol::constant(0.0, t_end).unwrap();
        let tr = integrate(&s, &p, &proto, &IntegrationConfig::default(), &uniform_grid(t_end, 31)).unwrap();
        for (t, st) in tr.times.iter().zip(&tr.states) {
            let exact = p_eq + (p0 - p_eq) * (-rate * t).exp();
            assert!((st.upper_population() - exact).abs() <= 1e-8 * exact);
        }
    }

    #[test]
    fn segment_boundary_handoff() {
        let mut p = SystemParams::fig3();
        p.eta_s = 1e4;
        let occ = p.occupancies().unwrap();
        let s0 = thermal_equilibrium_state(&p, &occ).unwrap();
        let cfg = IntegrationConfig::default();
        let amp = TAU * 1e6;
        let (t1, t2) = (0.4e-6, 0.6e-6);
        let whole = DriveProtocol::square_pulse(amp, t1, t2).unwrap();
        let grid: Vec<f64> = (1..=10).map(|k| k as f64 * 0.1e-6).collect();
        let joint = integrate(&s0, &p, &whole, &cfg, &grid).unwrap();

        let first = DriveProtocol::constant(amp, t1).unwrap();
        let g1: Vec<f64> = grid.iter().copied().filter(|&t| t <= t1).collect();
        let a = integrate(&s0, &p, &first, &cfg, &g1).unwrap();
        let handoff = *a.last().unwrap();
        let second = DriveProtocol::constant(0.0, t2).unwrap();
        let g2: Vec<f64> = grid.iter().filter(|&&t| t > t1).map(|&t| t - t1).collect();
        let b = integrate(&handoff, &p, &second, &cfg, &g2).unwrap();

        let split: Vec<&CumulantState> = a.states.iter().chain(b.states.iter()).collect();
        assert_eq!(split.len(), joint.states.len());
        for (x, y) in joint.states.iter().zip(split) {
            for slot in Slot::ALL {
                let (u, v) = (x.get(slot), y.get(slot));
                assert!((u - v).norm() <= cfg.abs_tol + 1e-7 * u.norm().max(v.norm()), "{slot:?}");
            }
        }
    }

    #[test]
    fn rejects_grid_outside_protocol() {
        let p = SystemParams::fig3();
        let proto = DriveProtocol::constant(0.0, 1e-6).unwrap();
        let s = CumulantState::vacuum();
        assert!(integrate(&s, &p, &proto, &IntegrationConfig::default(), &[0.0, 2e-6]).is_err());
        assert!(integrate(&s, &p, &proto, &IntegrationConfig::default(), &[0.5e-6, 0.2e-6]).is_err());
    }
}
