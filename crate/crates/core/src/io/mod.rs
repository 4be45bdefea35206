//! Config loading, run manifests and CSV output.

mod config;
mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::constants;
use crate::experiments::{ExperimentReport, ExperimentSpec, PointStatus, Preset};

pub use config::{parse_config, parse_config_str};
pub use report::{planned_files, write_report};

/// Drive amplitudes are taken literally as sqrt(rad/s), so that
/// amplitude * sqrt(kappa_1) is the drive term in rad/s.
pub const AMPLITUDE_CONVENTION: &str = "drive amplitude in sqrt(rad/s); drive term = amplitude * sqrt(kappa_1)";

/// Everything needed to rerun an experiment, plus its convergence record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub preset: Preset,
    /// Resolved spec; all frequencies and rates angular.
    pub spec: ExperimentSpec,
    pub units: String,
    pub amplitude_convention: String,
    pub constants: BTreeMap<String, f64>,
    pub all_converged: bool,
    pub points: Vec<PointStatus>,
    pub max_hermiticity_residue: f64,
    /// Seconds.
    pub wall_time: f64,
}

impl RunManifest {
    pub fn new(spec: &ExperimentSpec, report: &ExperimentReport) -> Self {
        RunManifest {
            tool: "nvcqed".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            preset: report.preset,
            spec: spec.clone(),
            units: "frequencies, rates and detunings in rad/s; times in s; temperatures in K".into(),
            amplitude_convention: AMPLITUDE_CONVENTION.into(),
            constants: constants::table().iter().map(|&(k, v)| (k.to_string(), v)).collect(),
            all_converged: report.all_converged(),
            points: report.points.clone(),
            max_hermiticity_residue: report.max_hermiticity_residue,
            wall_time: report.wall_time,
        }
    }
}
