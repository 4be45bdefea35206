//! Time-trace metrics for the transient scenarios.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Extrema smaller than this fraction of the largest excursion are ignored.
const EXTREMUM_THRESHOLD: f64 = 0.05;

/// Angular frequency of the oscillation of a complex signal about `centre`.
///
/// The deviation is projected onto its principal axis; the frequency is pi
/// over the mean spacing of successive extrema (maxima and minima) of that
/// projection. Returns `None` with fewer than three extrema.
pub fn oscillation_frequency(times: &[f64], signal: &[Complex64], centre: Complex64) -> Option<f64> {
    let d: Vec<Complex64> = signal.iter().map(|z| z - centre).collect();
    let sum_sq: Complex64 = d.iter().map(|z| z * z).sum();
    let rot = Complex64::from_polar(1.0, -0.5 * sum_sq.arg());
    let s: Vec<f64> = d.iter().map(|z| (z * rot).re).collect();
    let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) {
        return None;
    }
    let mut extrema = Vec::new();
    for i in 1..s.len().saturating_sub(1) {
        let max = s[i] > s[i - 1] && s[i] >= s[i + 1];
        let min = s[i] < s[i - 1] && s[i] <= s[i + 1];
        if (max || min) && s[i].abs() >= EXTREMUM_THRESHOLD * scale {
            extrema.push(vertex_time(&times[i - 1..=i + 1], &s[i - 1..=i + 1]));
        }
    }
    if extrema.len() < 3 {
        return None;
    }
    let spacing = (extrema[extrema.len() - 1] - extrema[0]) / (extrema.len() - 1) as f64;
    Some(std::f64::consts::PI / spacing)
}

/// Abscissa of the parabola through three samples.
fn vertex_time(t: &[f64], y: &[f64]) -> f64 {
    let (h0, h1) = (t[1] - t[0], t[2] - t[1]);
    let (d0, d1) = ((y[1] - y[0]) / h0, (y[2] - y[1]) / h1);
    let curv = (d1 - d0) / (0.5 * (h0 + h1));
    if curv == 0.0 {
        return t[1];
    }
    // Slope at the midpoint between the two secants is zero at the vertex.
    let mid = 0.5 * (t[0] + t[1]);
    (mid - d0 / curv).clamp(t[0], t[2])
}

/// Largest drop below the running maximum, relative to the peak.
/// Zero for a monotonically rising trace.
pub fn envelope_modulation(values: &[f64]) -> f64 {
    let peak = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return 0.0;
    }
    let mut running = f64::NEG_INFINITY;
    let mut drop: f64 = 0.0;
    for &v in values {
        running = running.max(v);
        drop = drop.max(running - v);
    }
    drop / peak
}

/// Phases of a superradiant pulse after a short drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseMetrics {
    pub drive_end: f64,
    /// Photon number and time of the emission maximum after the drive has rung down.
    pub burst_peak: f64,
    pub burst_time: f64,
    /// First time after the burst with fewer than 1% of its peak photons.
    pub pulse_end: f64,
    /// pulse_end - drive_end.
    pub duration: f64,
    /// Upper population at pulse_end.
    pub plateau: f64,
    /// Time from pulse_end until J first reaches 90% of `j_final`.
    pub recool_time: Option<f64>,
    pub j_final: f64,
}

/// Reads the pulse phases off photon number, upper population and J traces.
pub fn pulse_metrics(
    times: &[f64],
    photons: &[f64],
    population: &[f64],
    j: &[f64],
    drive_end: f64,
    j_final: f64,
) -> Option<PulseMetrics> {
    let start = times.partition_point(|&t| t < drive_end);
    // Ring-down of the driven field: skip to the first local minimum.
    let mut k = start;
    while k + 1 < photons.len() && photons[k + 1] <= photons[k] {
        k += 1;
    }
    let (rel, &burst_peak) =
        photons[k..].iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let burst = k + rel;
    if burst == k || !(burst_peak > photons[k]) {
        return None;
    }
    let end = burst + photons[burst..].iter().position(|&n| n < 0.01 * burst_peak)?;
    let pulse_end = times[end];
    let recool_time = j[end..].iter().position(|&v| v >= 0.9 * j_final).map(|r| times[end + r] - pulse_end);
    Some(PulseMetrics {
        drive_end,
        burst_peak,
        burst_time: times[burst],
        pulse_end,
        duration: pulse_end - drive_end,
        plateau: population[end],
        recool_time,
        j_final,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    #[test]
    fn damped_rotating_signal() {
        let w = TAU * 3.0;
        let times: Vec<f64> = (0..2000).map(|k| k as f64 * 1e-3).collect();
        let centre = Complex64::new(0.3, -2.0);
        let sig: Vec<Complex64> = times
            .iter()
            .map(|&t| centre + Complex64::new(0.0, 1.0) * (1.0 - (w * t).cos() * (-0.4 * t).exp()))
            .collect();
        let f = oscillation_frequency(&times, &sig, centre + Complex64::new(0.0, 1.0)).unwrap();
        assert!((f / w - 1.0).abs() < 2e-3, "{f}");
        let flat = vec![centre; 10];
        assert!(oscillation_frequency(&times[..10], &flat, centre).is_none());
    }

    #[test]
    fn modulation_of_monotone_and_ringing_traces() {
        let rising: Vec<f64> = (0..100).map(|k| 1.0 - (-0.05 * k as f64).exp()).collect();
        assert_eq!(envelope_modulation(&rising), 0.0);
        let ringing: Vec<f64> = (0..100).map(|k| 1.0 - (0.3 * k as f64).cos() * 0.5).collect();
        assert!((envelope_modulation(&ringing) - 1.0 / 1.5).abs() < 1e-2);
    }

    #[test]
    fn burst_after_drive() {
        let times: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        // Drive up to t=10, ring-down, then a Gaussian burst at t=200.
        let photons: Vec<f64> = times
            .iter()
            .map(|&t| if t <= 10.0 { 1e3 * t } else { 1e4 * (-(t - 10.0) / 5.0).exp() + 50.0 * (-((t - 200.0) / 30.0).powi(2)).exp() })
            .collect();
        let pop: Vec<f64> = times.iter().map(|&t| 0.5 + 0.4 * (-t / 300.0).exp()).collect();
        let j: Vec<f64> = times.iter().map(|&t| 1.0 - (-t / 300.0).exp()).collect();
        let m = pulse_metrics(&times, &photons, &pop, &j, 10.0, 1.0).unwrap();
        assert_eq!(m.burst_time, 200.0);
        assert!((m.burst_peak - 50.0).abs() < 1e-9);
        assert_eq!(m.pulse_end, 265.0);
        assert_eq!(m.duration, 255.0);
        // 1 - exp(-t/300) crosses 0.9 at t = 690.8.
        assert_eq!(m.recool_time, Some(691.0 - 265.0));
    }
}
