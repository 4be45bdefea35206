//! Holstein–Primakoff hybrid modes, spectral peak extraction and the
//! frequency-sum inversion used for sensing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Normal modes of a cavity coupled with strength sqrt(2J) g to a bosonized
/// collective spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridModes {
    pub omega_plus: f64,
    pub omega_minus: f64,
    /// sqrt(8 g^2 J + (omega_s - omega_c)^2), the mode separation.
    pub chi: f64,
}

impl HybridModes {
    pub fn splitting(&self) -> f64 {
        self.omega_plus - self.omega_minus
    }
}

/// omega_pm = (omega_s + omega_c +- chi) / 2 with chi = sqrt(8 g^2 J + (omega_s - omega_c)^2).
///
/// Works equally with absolute frequencies or detunings from a common
/// reference, since only differences enter chi.
pub fn hybrid_mode_frequencies(omega_s: f64, omega_c: f64, g_s: f64, j: f64) -> Result<HybridModes> {
    if !(j >= 0.0) || !j.is_finite() {
        return Err(Error::param("j", format!("{j} must be finite and >= 0")));
    }
    let detuning = omega_s - omega_c;
    let chi = (8.0 * g_s * g_s * j + detuning * detuning).sqrt();
    let sum = omega_s + omega_c;
    let omega_plus = 0.5 * (sum + chi);
    Ok(HybridModes { omega_plus, omega_minus: sum - omega_plus, chi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Same units as the sweep abscissa.
    pub frequency: f64,
    pub height: f64,
    pub prominence: f64,
    /// Index of the sampled maximum.
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumPeaks {
    pub peaks: Vec<Peak>,
}

impl SpectrumPeaks {
    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.frequency).collect()
    }
}

/// Default prominence threshold, as a fraction of the global maximum.
pub const DEFAULT_PROMINENCE: f64 = 0.05;

fn check_sweep(freqs: &[f64], values: &[f64]) -> Result<()> {
    if freqs.len() != values.len() {
        return Err(Error::InvalidSweep(format!("{} frequencies but {} values", freqs.len(), values.len())));
    }
    if freqs.len() < 5 {
        return Err(Error::InvalidSweep(format!("need at least 5 points, got {}", freqs.len())));
    }
    if freqs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidSweep("frequencies must be strictly increasing".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidSweep("non-finite sweep value".into()));
    }
    Ok(())
}

/// Topographic prominence of the sample at `i`.
fn prominence(values: &[f64], i: usize) -> f64 {
    let h = values[i];
    let mut left_min = h;
    for &v in values[..i].iter().rev() {
        if v > h {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = h;
    for &v in &values[i + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Vertex of the parabola through three points.
fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (x0, x1, x2) = (x[0] - x[1], 0.0, x[2] - x[1]);
    let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
    let a = (x2 * (y[1] - y[0]) + x1 * (y[0] - y[2]) + x0 * (y[2] - y[1])) / denom;
    let b = (x2 * x2 * (y[0] - y[1]) + x1 * x1 * (y[2] - y[0]) + x0 * x0 * (y[1] - y[2])) / denom;
    let c = y[1];
    if !(a < 0.0) {
        return (x[1], y[1]);
    }
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    (x[1] + xv, a * xv * xv + b * xv + c)
}

/// Interior local maxima whose prominence is at least `min_prominence`
/// times the global maximum, refined by 3-point quadratic interpolation.
pub fn find_peaks_with(freqs: &[f64], values: &[f64], min_prominence: f64) -> Result<SpectrumPeaks> {
    check_sweep(freqs, values)?;
    let global = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let threshold = min_prominence * global.abs();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < values.len() {
        if values[i] > values[i - 1] {
            // Walk over a flat top.
            let mut k = i;
            while k + 1 < values.len() && values[k + 1] == values[i] {
                k += 1;
            }
            if k + 1 < values.len() && values[k + 1] < values[i] {
                let centre = (i + k) / 2;
                let prom = prominence(values, centre);
                if prom >= threshold && values[centre] > 0.0 {
                    let (frequency, height) = parabola_vertex(
                        [freqs[centre - 1], freqs[centre], freqs[centre + 1]],
                        [values[centre - 1], values[centre], values[centre + 1]],
                    );
                    peaks.push(Peak { frequency, height, prominence: prom, index: centre });
                }
            }
            i = k + 1;
        } else {
            i += 1;
        }
    }
    Ok(SpectrumPeaks { peaks })
}

pub fn find_peaks(freqs: &[f64], values: &[f64]) -> Result<SpectrumPeaks> {
    find_peaks_with(freqs, values, DEFAULT_PROMINENCE)
}

/// Spin frequency from two hybrid-mode peaks: omega_+ + omega_- - omega_c.
pub fn infer_spin_frequency(peaks: &SpectrumPeaks, omega_c: f64) -> Result<f64> {
    match peaks.peaks.as_slice() {
        [a, b] => Ok(a.frequency + b.frequency - omega_c),
        other => Err(Error::PeakCount(other.len())),
    }
}

/// Interior local minima of `values` that sit below both neighbouring maxima
/// by at least `min_depth` times the global maximum; returns their indices.
pub fn find_dips(values: &[f64], min_depth: f64) -> Vec<usize> {
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    let global = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (1..values.len().saturating_sub(1))
        .filter(|&i| negated[i] > negated[i - 1] && negated[i] >= negated[i + 1])
        .filter(|&i| {
            let left = values[..i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let right = values[i + 1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            left.min(right) - values[i] >= min_depth * global
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lorentz(x: f64, x0: f64, w: f64) -> f64 {
        1.0 / (1.0 + ((x - x0) / w).powi(2))
    }

    fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn resonant_modes() {
        let (g, j) = (2.0, 50.0);
        let m = hybrid_mode_frequencies(7.0, 7.0, g, j).unwrap();
        assert!((m.omega_plus - 7.0 - (2.0 * j).sqrt() * g).abs() < 1e-12);
        assert!((m.omega_minus - 7.0 + (2.0 * j).sqrt() * g).abs() < 1e-12);
        let bare = hybrid_mode_frequencies(3.0, 5.0, g, 0.0).unwrap();
        assert_eq!((bare.omega_plus, bare.omega_minus), (5.0, 3.0));
        assert!(hybrid_mode_frequencies(3.0, 5.0, g, -1.0).is_err());
    }

    #[test]
    fn single_lorentzian_peak() {
        let x = grid(-10.0, 10.0, 81);
        let centre = 0.37;
        let y: Vec<f64> = x.iter().map(|&v| lorentz(v, centre, 1.5)).collect();
        let p = find_peaks(&x, &y).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p.peaks[0].frequency - centre).abs() < 0.5 * (x[1] - x[0]));
    }

    #[test]
    fn double_lorentzian_separation() {
        let x = grid(-10.0, 10.0, 101);
        let (c, w) = (3.3, 0.8);
        let y: Vec<f64> = x.iter().map(|&v| lorentz(v, -c, w) + lorentz(v, c, w)).collect();
        let p = find_peaks(&x, &y).unwrap();
        assert_eq!(p.len(), 2);
        let sep = p.peaks[1].frequency - p.peaks[0].frequency;
        assert!((sep - 2.0 * c).abs() < x[1] - x[0]);
        assert!(infer_spin_frequency(&p, 0.0).unwrap().abs() < x[1] - x[0]);
    }

    #[test]
    fn monotone_and_short_sweeps() {
        let x = grid(0.0, 1.0, 10);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert!(find_peaks(&x, &y).unwrap().is_empty());
        assert!(find_peaks(&x[..4], &y[..4]).is_err());
        let mut bad = x.clone();
        bad.swap(2, 3);
        assert!(find_peaks(&bad, &y).is_err());
    }

    #[test]
    fn small_ripples_are_ignored() {
        let x = grid(-5.0, 5.0, 201);
        let y: Vec<f64> = x.iter().map(|&v| lorentz(v, 0.0, 1.0) + 0.01 * (7.0 * v).sin()).collect();
        assert_eq!(find_peaks(&x, &y).unwrap().len(), 1);
    }

    #[test]
    fn peak_count_error() {
        let p = SpectrumPeaks { peaks: vec![] };
        assert!(matches!(infer_spin_frequency(&p, 1.0), Err(Error::PeakCount(0))));
    }

    #[test]
    fn dip_between_peaks() {
        let x = grid(-10.0, 10.0, 101);
        let y: Vec<f64> = x.iter().map(|&v| lorentz(v, -2.0, 1.5) + lorentz(v, 2.0, 1.5)).collect();
        assert_eq!(find_dips(&y, 0.01), vec![50]);
        let single: Vec<f64> = x.iter().map(|&v| lorentz(v, 0.0, 1.5)).collect();
        assert!(find_dips(&single, 0.01).is_empty());
    }
}
