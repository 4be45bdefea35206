//! Parameter records, thermal occupancies and drive protocols.
//!
//! All frequencies and rates are angular (rad/s) internally. Conversion from
//! cyclic units happens once, in the config loader.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B, TAU};
use crate::error::{Error, Result};

/// Physical parameters of the driven resonator + spin ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Resonator frequency, rad/s.
    pub omega_c: f64,
    /// Total photon loss rate, rad/s.
    pub kappa_c: f64,
    /// Input-port loss; the drive couples through sqrt(kappa_1).
    pub kappa_1: f64,
    /// Spin transition frequency, rad/s.
    pub omega_s: f64,
    /// Spin-lattice relaxation rate.
    pub gamma_s: f64,
    /// Optical spin-cooling rate.
    pub eta_s: f64,
    /// Pure dephasing rate.
    pub chi_s: f64,
    /// Single-spin coupling, rad/s.
    pub g_s: f64,
    /// Number of spins, kept real so that 1e16 is representable.
    pub n_spins: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    /// Drive frequency, rad/s.
    pub omega_d: f64,
}

impl SystemParams {
    /// Resonator/spin parameters of the room-temperature Rabi oscillation and
    /// splitting scenario. `eta_s` starts at zero.
    pub fn fig3() -> Self {
        let omega_c = TAU * 2.69e9;
        let kappa_c = TAU * 0.8e6;
        SystemParams {
            omega_c,
            kappa_c,
            kappa_1: kappa_c / 2.0,
            omega_s: omega_c,
            gamma_s: TAU * 0.157,
            eta_s: 0.0,
            chi_s: TAU * 2.6e6,
            g_s: TAU * 12.0,
            n_spins: 2.5e12,
            temperature: 293.0,
            omega_d: omega_c,
        }
    }

    /// Parameters of the stimulated superradiance scenario. `eta_s` starts at 1e4 s^-1.
    pub fn fig4() -> Self {
        let omega_c = TAU * 3.18e9;
        let kappa_c = TAU * 13.8e6;
        SystemParams {
            omega_c,
            kappa_c,
            kappa_1: kappa_c / 2.0,
            omega_s: omega_c,
            gamma_s: TAU * 0.157,
            eta_s: 1e4,
            chi_s: TAU * 4.7e6,
            g_s: TAU * 83.1e-3,
            n_spins: 1.5e16,
            temperature: 293.0,
            omega_d: omega_c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega_c", self.omega_c),
            ("kappa_c", self.kappa_c),
            ("kappa_1", self.kappa_1),
            ("omega_s", self.omega_s),
            ("gamma_s", self.gamma_s),
            ("eta_s", self.eta_s),
            ("chi_s", self.chi_s),
            ("g_s", self.g_s),
            ("n_spins", self.n_spins),
            ("temperature", self.temperature),
            ("omega_d", self.omega_d),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, format!("{v} is not finite")));
            }
        }
        let non_negative = [
            ("kappa_c", self.kappa_c),
            ("kappa_1", self.kappa_1),
            ("gamma_s", self.gamma_s),
            ("eta_s", self.eta_s),
            ("chi_s", self.chi_s),
            ("g_s", self.g_s),
            ("temperature", self.temperature),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(Error::param(name, format!("{v} must be >= 0")));
            }
        }
        if self.kappa_1 > self.kappa_c {
            return Err(Error::param("kappa_1", "must not exceed kappa_c"));
        }
        if self.n_spins < 1.0 {
            return Err(Error::param("n_spins", "must be >= 1"));
        }
        if self.omega_c <= 0.0 || self.omega_s <= 0.0 {
            return Err(Error::param("omega_c/omega_s", "transition frequencies must be > 0"));
        }
        if !self.delta_c().is_finite() || !self.delta_s().is_finite() {
            return Err(Error::param("omega_d", "detunings are not finite"));
        }
        Ok(())
    }

    /// Resonator detuning from the drive, omega_c - omega_d.
    pub fn delta_c(&self) -> f64 {
        self.omega_c - self.omega_d
    }

    /// Spin detuning from the drive, omega_s - omega_d.
    pub fn delta_s(&self) -> f64 {
        self.omega_s - self.omega_d
    }

    /// Drive coupling coefficient sqrt(kappa_1).
    pub fn drive_coupling(&self) -> f64 {
        self.kappa_1.sqrt()
    }

    /// Copy with all three frequencies shifted by `delta`.
    pub fn frame_shifted(&self, delta: f64) -> Self {
        SystemParams {
            omega_c: self.omega_c + delta,
            omega_s: self.omega_s + delta,
            omega_d: self.omega_d + delta,
            ..*self
        }
    }

    pub fn occupancies(&self) -> Result<ThermalOccupancies> {
        ThermalOccupancies::of(self)
    }
}

/// Bose-Einstein occupation 1/(exp(hbar omega / k_B T) - 1); exactly 0 at T = 0.
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::param("omega", format!("{omega} must be > 0")));
    }
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::param("temperature", format!("{temperature} must be >= 0")));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalOccupancies {
    pub n_c_th: f64,
    pub n_s_th: f64,
}

impl ThermalOccupancies {
    pub fn of(params: &SystemParams) -> Result<Self> {
        Ok(ThermalOccupancies {
            n_c_th: thermal_occupation(params.omega_c, params.temperature)?,
            n_s_th: thermal_occupation(params.omega_s, params.temperature)?,
        })
    }
}

/// Spin population relaxation rate eta_s + gamma_s(1 + 2 n_s_th).
pub fn population_relaxation_rate(params: &SystemParams, occ: &ThermalOccupancies) -> f64 {
    params.eta_s + params.gamma_s * (1.0 + 2.0 * occ.n_s_th)
}

/// Spin coherence decay rate, i.e. -Im of the complex spin detuning.
pub fn coherence_decay_rate(params: &SystemParams, occ: &ThermalOccupancies) -> f64 {
    0.5 * (population_relaxation_rate(params, occ) + 2.0 * params.chi_s)
}

/// Damped detunings of the rotating-frame equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexDetunings {
    pub delta_c_tilde: Complex64,
    pub delta_s_tilde: Complex64,
}

pub fn complex_detunings(params: &SystemParams, occ: &ThermalOccupancies) -> ComplexDetunings {
    ComplexDetunings {
        delta_c_tilde: Complex64::new(params.delta_c(), -0.5 * params.kappa_c),
        delta_s_tilde: Complex64::new(params.delta_s(), -coherence_decay_rate(params, occ)),
    }
}

/// One constant-amplitude piece of a drive protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    /// Seconds.
    pub duration: f64,
    /// Drive amplitude in sqrt(rad/s); amplitude * sqrt(kappa_1) is the Rabi drive in rad/s.
    pub amplitude: f64,
}

/// Piecewise-constant drive at the fixed frequency `SystemParams::omega_d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    segments: Vec<DriveSegment>,
}

impl DriveProtocol {
    pub fn new(segments: Vec<DriveSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::param("segments", "protocol needs at least one segment"));
        }
        for s in &segments {
            if !(s.duration > 0.0) || !s.duration.is_finite() {
                return Err(Error::param("duration", format!("{} must be finite and > 0", s.duration)));
            }
            if !s.amplitude.is_finite() {
                return Err(Error::param("amplitude", "must be finite"));
            }
        }
        let proto = DriveProtocol { segments };
        if !proto.total_duration().is_finite() {
            return Err(Error::param("segments", "total duration overflows"));
        }
        Ok(proto)
    }

    pub fn constant(amplitude: f64, duration: f64) -> Result<Self> {
        Self::new(vec![DriveSegment { duration, amplitude }])
    }

    /// A square pulse followed by an undriven tail.
    pub fn square_pulse(amplitude: f64, pulse: f64, tail: f64) -> Result<Self> {
        Self::new(vec![
            DriveSegment { duration: pulse, amplitude },
            DriveSegment { duration: tail, amplitude: 0.0 },
        ])
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment start/end times as (t_start, t_end, amplitude).
    pub fn spans(&self) -> Vec<(f64, f64, f64)> {
        let mut t = 0.0;
        self.segments
            .iter()
            .map(|s| {
                let start = t;
                t += s.duration;
                (start, t, s.amplitude)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_is_exactly_zero() {
        assert_eq!(thermal_occupation(TAU * 2.69e9, 0.0).unwrap(), 0.0);
        assert_eq!(thermal_occupation(1.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn rejects_non_positive_frequency() {
        assert!(thermal_occupation(0.0, 1.0).is_err());
        assert!(thermal_occupation(-1.0, 1.0).is_err());
        assert!(thermal_occupation(1.0, -1.0).is_err());
    }

    #[test]
    fn occupation_reference_values() {
        // Frozen from a 50-digit mpmath evaluation of 1/(exp(hbar w/kT)-1).
        let room = thermal_occupation(TAU * 2.69e9, 293.0).unwrap();
        assert!((room - 2269.064_871_99).abs() < 1e-6, "{room}");
        let cold = thermal_occupation(TAU * 2.69e9, 0.025).unwrap();
        assert!((cold - 5.751_754_921e-3).abs() < 1e-12, "{cold}");
    }

    #[test]
    fn resonant_lossless_detuning_vanishes() {
        let mut p = SystemParams::fig3();
        p.kappa_c = 0.0;
        p.kappa_1 = 0.0;
        let occ = p.occupancies().unwrap();
        let d = complex_detunings(&p, &occ);
        assert_eq!(d.delta_c_tilde, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fig3_detunings() {
        let mut p = SystemParams::fig3();
        let occ = p.occupancies().unwrap();
        let d = complex_detunings(&p, &occ);
        assert_eq!(d.delta_c_tilde.re, 0.0);
        assert!((d.delta_c_tilde.im + TAU * 0.4e6).abs() < 1e-6);

        p.eta_s = 1e4;
        let d = complex_detunings(&p, &occ);
        let expected = -(1e4 + p.gamma_s * (1.0 + 2.0 * occ.n_s_th) + 2.0 * TAU * 2.6e6) / 2.0;
        assert!((d.delta_s_tilde.im - expected).abs() < 1e-9 * expected.abs());
        // the same number written out with the rounded rates
        let rounded = -(1e4 + 0.986 * (1.0 + 2.0 * 2269.0) + 2.0 * TAU * 2.6e6) / 2.0;
        assert!((d.delta_s_tilde.im - rounded).abs() < 1e-5 * rounded.abs());
    }

    #[test]
    fn validation_catches_bad_records() {
        let mut p = SystemParams::fig3();
        p.kappa_1 = 2.0 * p.kappa_c;
        assert!(p.validate().is_err());
        let mut p = SystemParams::fig3();
        p.n_spins = 0.5;
        assert!(p.validate().is_err());
        let mut p = SystemParams::fig3();
        p.chi_s = -1.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::fig3();
        p.omega_d = f64::NAN;
        assert!(p.validate().is_err());
        assert!(SystemParams::fig3().validate().is_ok());
        assert!(SystemParams::fig4().validate().is_ok());
    }

    #[test]
    fn protocol_validation() {
        assert!(DriveProtocol::new(vec![]).is_err());
        assert!(DriveProtocol::constant(1.0, 0.0).is_err());
        assert!(DriveProtocol::constant(1.0, f64::INFINITY).is_err());
        let p = DriveProtocol::square_pulse(2.0, 1e-6, 3e-6).unwrap();
        assert!((p.total_duration() - 4e-6).abs() < 1e-20);
        let spans = p.spans();
        assert_eq!(spans[1].0, 1e-6);
        assert_eq!(spans[1].2, 0.0);
    }
}
