//! Scenario runners for the Dicke map, Rabi oscillations, Rabi splitting,
//! superradiance pulses, sensing sweeps and the oracle comparison.
//!
//! Each runner is deterministic: grid points are computed in parallel chains
//! but always merged by grid index.

mod dicke_map;
mod oracle_check;
mod signal;
mod spectrum;
mod transient;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constants::TAU;
use crate::error::{Error, Result};
use crate::integrator::{IntegrationConfig, SteadyStateConfig, SteadyStateResult};
use crate::model::SystemParams;

pub use dicke_map::{run_dicke_map, DickeMapPoint};
pub use oracle_check::{compare_with_oracle, oracle_params, run_oracle_comparison, OracleRun};
pub use signal::{envelope_modulation, oscillation_frequency, pulse_metrics, PulseMetrics};
pub use spectrum::{
    run_rabi_spectrum, run_sensing, spectrum_label, steady_sweep, transmission_label, SensingReport, SpectrumRun,
    TransmissionCurve,
};
pub use transient::{pulse_grid, run_rabi_transient, run_superradiance, PulseRun, TransientRun};

/// Named scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5a,
    Fig5b,
    OracleCheck,
}

impl Preset {
    pub const ALL: [Preset; 7] =
        [Preset::Fig2b, Preset::Fig3a, Preset::Fig3b, Preset::Fig4, Preset::Fig5a, Preset::Fig5b, Preset::OracleCheck];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2b => "fig2b",
            Preset::Fig3a => "fig3a",
            Preset::Fig3b => "fig3b",
            Preset::Fig4 => "fig4",
            Preset::Fig5a => "fig5a",
            Preset::Fig5b => "fig5b",
            Preset::OracleCheck => "oracle-check",
        }
    }

    /// Parameter set the scenario starts from.
    pub fn base_params(self) -> SystemParams {
        match self {
            Preset::Fig4 => SystemParams::fig4(),
            Preset::OracleCheck => oracle_params(2),
            _ => SystemParams::fig3(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("preset", format!("unknown preset `{s}`")))
    }
}

/// Everything a runner needs. Frequencies, rates and detunings are angular;
/// times in seconds; the drive amplitude in sqrt(rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub params: SystemParams,
    pub drive_amplitude: f64,
    /// Square-pulse length for the transient scenarios.
    pub pulse_duration: f64,
    /// Simulated time after the pulse (the whole run for the oracle
    /// comparison); `None` picks a scenario default.
    pub tail_duration: Option<f64>,
    pub samples: usize,
    pub eta_values: Vec<f64>,
    pub temperatures: Vec<f64>,
    /// omega_d - omega_c grid of the spectrum sweeps.
    pub drive_detunings: Vec<f64>,
    /// Fixed omega_s - omega_c values of the sensing spectra.
    pub spin_detunings: Vec<f64>,
    /// omega_s - omega_c grid of the transmission curves.
    pub spin_sweep: Vec<f64>,
    /// Fixed omega_d - omega_c values of the transmission curves.
    pub drive_offsets: Vec<f64>,
    pub oracle_spins: Vec<usize>,
    /// Report-only strong drive for the oracle comparison.
    pub strong_drive_amplitude: Option<f64>,
    pub integration: IntegrationConfig,
    pub steady: SteadyStateConfig,
    pub workers: usize,
}

/// `count` evenly spaced values over [lo, hi].
pub fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Compact exponent form used in file names: 0, 1e2, 2.5e4, -1.59e6.
pub fn number_label(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:e}")
    }
}

fn mhz(x: f64) -> f64 {
    TAU * x * 1e6
}

impl ExperimentSpec {
    /// Default scenario definition.
    pub fn preset(preset: Preset) -> Self {
        let mut spec = ExperimentSpec {
            preset,
            params: preset.base_params(),
            drive_amplitude: 0.0,
            pulse_duration: 0.0,
            tail_duration: None,
            samples: 0,
            eta_values: Vec::new(),
            temperatures: Vec::new(),
            drive_detunings: Vec::new(),
            spin_detunings: Vec::new(),
            spin_sweep: Vec::new(),
            drive_offsets: Vec::new(),
            oracle_spins: Vec::new(),
            strong_drive_amplitude: None,
            integration: IntegrationConfig::default(),
            steady: SteadyStateConfig::default(),
            workers: 8,
        };
        match preset {
            Preset::Fig2b => {
                spec.temperatures = vec![0.001, 0.01, 0.1, 1.0, 10.0, 100.0, 293.0];
                spec.eta_values = vec![0.0, 1e2, 1e3, 1e4, 1e5, 1e6];
            }
            Preset::Fig3a => {
                spec.drive_amplitude = TAU * 1e8;
                spec.pulse_duration = 1e-6;
                spec.tail_duration = Some(2e-6);
                spec.samples = 3001;
                spec.eta_values = vec![0.0, 5e2, 1e3, 1e4];
            }
            Preset::Fig3b => {
                spec.drive_amplitude = TAU * 1e6;
                spec.eta_values = vec![0.0, 1e2, 1e3, 1e4];
                spec.drive_detunings = linear_grid(mhz(-40.0), mhz(40.0), 201);
            }
            Preset::Fig4 => {
                spec.drive_amplitude = TAU * 17e10;
                spec.pulse_duration = 28e-9;
                // Fine samples over the first 5 us.
                spec.samples = 5001;
                spec.eta_values = vec![1e4, 2.5e4, 1e6];
            }
            Preset::Fig5a | Preset::Fig5b => {
                spec.drive_amplitude = TAU * 5e7;
                // Below ~1e5 s^-1 this drive saturates the spins and the
                // splitting collapses into one peak.
                spec.params.eta_s = 1e6;
                spec.eta_values = vec![1e6];
                spec.drive_detunings = linear_grid(mhz(-40.0), mhz(40.0), 201);
                spec.spin_detunings = vec![mhz(-2.0), 0.0, mhz(2.0)];
                spec.spin_sweep = linear_grid(mhz(-200.0), mhz(200.0), 401);
                spec.drive_offsets = vec![mhz(-1.59), 0.0, mhz(1.59)];
            }
            Preset::OracleCheck => {
                spec.drive_amplitude = 0.15;
                spec.strong_drive_amplitude = Some(3.0);
                spec.samples = 101;
                spec.oracle_spins = vec![1, 2, 3];
                spec.integration = IntegrationConfig { rel_tol: 1e-10, abs_tol: 1e-13, ..IntegrationConfig::default() };
            }
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.integration.validate()?;
        self.steady.integration.validate()?;
        if self.workers == 0 {
            return Err(Error::param("workers", "must be >= 1"));
        }
        if !self.drive_amplitude.is_finite() {
            return Err(Error::param("drive_amplitude", "must be finite"));
        }
        let sorted = |name: &'static str, v: &[f64], required: bool| -> Result<()> {
            if required && v.is_empty() {
                return Err(Error::param(name, "grid must not be empty"));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(name, "grid values must be finite"));
            }
            if v.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::param(name, "grid must be strictly increasing"));
            }
            Ok(())
        };
        let p = self.preset;
        sorted("eta_values", &self.eta_values, p != Preset::OracleCheck)?;
        if self.eta_values.iter().any(|&e| e < 0.0) {
            return Err(Error::param("eta_values", "rates must be >= 0"));
        }
        sorted("temperatures", &self.temperatures, p == Preset::Fig2b)?;
        if self.temperatures.iter().any(|&t| t < 0.0) {
            return Err(Error::param("temperatures", "must be >= 0"));
        }
        let spectral = p == Preset::Fig3b;
        sorted("drive_detunings", &self.drive_detunings, spectral)?;
        if !self.drive_detunings.is_empty() && self.drive_detunings.len() < 5 {
            return Err(Error::param("drive_detunings", "need at least 5 points"));
        }
        let sensing = matches!(p, Preset::Fig5a | Preset::Fig5b);
        let spectra = !self.drive_detunings.is_empty();
        let curves = !self.spin_sweep.is_empty();
        if sensing && !spectra && !curves {
            return Err(Error::param("spin_sweep", "sensing needs drive_detunings or spin_sweep"));
        }
        sorted("spin_detunings", &self.spin_detunings, sensing && spectra)?;
        sorted("spin_sweep", &self.spin_sweep, false)?;
        sorted("drive_offsets", &self.drive_offsets, sensing && curves)?;
        if p == Preset::OracleCheck {
            if self.oracle_spins.is_empty() || self.oracle_spins.iter().any(|&n| !(1..=4).contains(&n)) {
                return Err(Error::param("oracle_spins", "need values in 1..=4"));
            }
            if self.oracle_spins.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::param("oracle_spins", "must be strictly increasing"));
            }
        }
        if matches!(p, Preset::Fig3a | Preset::Fig4) && !(self.pulse_duration > 0.0 && self.pulse_duration.is_finite()) {
            return Err(Error::param("pulse_duration", "must be > 0"));
        }
        if sensing && curves && self.spin_sweep.len() < 2 {
            return Err(Error::param("spin_sweep", "need at least 2 points"));
        }
        if matches!(p, Preset::Fig3a | Preset::Fig4 | Preset::OracleCheck) && self.samples < 2 {
            return Err(Error::param("samples", "need at least 2 samples"));
        }
        if let Some(t) = self.tail_duration {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::param("tail_duration", "must be > 0"));
            }
        }
        Ok(())
    }

    /// Base parameters with the optical cooling rate replaced.
    pub fn params_at_eta(&self, eta_s: f64) -> SystemParams {
        SystemParams { eta_s, ..self.params }
    }
}

/// Convergence record of one steady-state grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointStatus {
    pub curve: String,
    pub index: usize,
    pub converged: bool,
    pub residual_norm: f64,
    pub windowed_change: f64,
    pub elapsed_model_time: f64,
    pub windows: usize,
}

impl PointStatus {
    pub(crate) fn of(curve: &str, index: usize, r: &SteadyStateResult) -> Self {
        PointStatus {
            curve: curve.to_string(),
            index,
            converged: r.converged,
            residual_norm: r.residual_norm,
            windowed_change: r.windowed_change,
            elapsed_model_time: r.elapsed_model_time,
            windows: r.windows,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ReportBody {
    DickeMap(Vec<DickeMapPoint>),
    RabiTransient(Vec<TransientRun>),
    RabiSpectrum(Vec<SpectrumRun>),
    Superradiance(Vec<PulseRun>),
    Sensing(SensingReport),
    OracleComparison(Vec<OracleRun>),
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub preset: Preset,
    pub body: ReportBody,
    /// One entry per steady-state grid point, in grid order.
    pub points: Vec<PointStatus>,
    /// Largest relative imaginary part seen on the hermitian slots.
    pub max_hermiticity_residue: f64,
    /// Seconds.
    pub wall_time: f64,
}

impl ExperimentReport {
    pub fn all_converged(&self) -> bool {
        self.points.iter().all(|p| p.converged)
    }

    pub fn non_converged(&self) -> impl Iterator<Item = &PointStatus> {
        self.points.iter().filter(|p| !p.converged)
    }
}

/// Runs `jobs` on at most `workers` threads; output order follows input order.
pub(crate) fn parallel_map<T, R, F>(workers: usize, jobs: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    pool.install(|| jobs.into_par_iter().map(f).collect())
}

/// Dispatches on the preset.
pub fn run(spec: &ExperimentSpec) -> Result<ExperimentReport> {
    match spec.preset {
        Preset::Fig2b => run_dicke_map(spec),
        Preset::Fig3a => run_rabi_transient(spec),
        Preset::Fig3b => run_rabi_spectrum(spec),
        Preset::Fig4 => run_superradiance(spec),
        Preset::Fig5a | Preset::Fig5b => run_sensing(spec),
        Preset::OracleCheck => run_oracle_comparison(spec),
    }
}
