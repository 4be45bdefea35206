//! Physical constants (CODATA 2018, SI). Every other module reads them from here.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Boltzmann constant, J/K (exact).
pub const K_B: f64 = 1.380_649e-23;

/// 2π, used when converting cyclic frequencies (Hz) into angular ones (rad/s).
pub const TAU: f64 = std::f64::consts::TAU;

/// Name/value pairs echoed into run manifests.
pub fn table() -> [(&'static str, f64); 3] {
    [("hbar_js", HBAR), ("k_b_jpk", K_B), ("two_pi", TAU)]
}
