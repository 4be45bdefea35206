//! Second-order cumulant (mean-field) equations of motion in the frame
//! rotating at the drive frequency, plus the analytic steady-population and
//! Dicke-coordinate formulas.
//!
//! Third-order moments are factorized as
//! <opq> ~ <o><pq> + <oq><p> + <q><op> - 2<o><p><q>.
//! Moments that are complex conjugates of stored slots (<a^+>, <s21>,
//! <a s21>, <a^+ s21>, <a s22>, <s22 s12>, <s21 s21>, <a^+ a^+>) are read
//! back through `conj`, so the four hermitian slots get exactly real
//! derivatives.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{
    complex_detunings, population_relaxation_rate, DriveProtocol, SystemParams, ThermalOccupancies,
};
use crate::state::{CumulantState, DickeCoordinates, Slot};

/// Time derivative of every slot of a [`CumulantState`], in (slot units)/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative(pub [Complex64; 12]);

impl StateDerivative {
    pub fn get(&self, slot: Slot) -> Complex64 {
        self.0[slot.index()]
    }

    /// Largest |Im| over the hermitian slots.
    pub fn hermiticity_residue(&self) -> f64 {
        Slot::REAL.iter().map(|&s| self.get(s).im.abs()).fold(0.0, f64::max)
    }
}

/// Right-hand side with all parameter-dependent coefficients precomputed.
#[derive(Debug, Clone, Copy)]
pub struct MeanFieldRhs {
    dc: Complex64,
    ds: Complex64,
    kappa: f64,
    n_c_th: f64,
    up_rate: f64,
    relax: f64,
    dephase: f64,
    g: f64,
    n: f64,
    drive: f64,
}

impl MeanFieldRhs {
    pub fn new(params: &SystemParams, occ: &ThermalOccupancies, drive_amplitude: f64) -> Self {
        let det = complex_detunings(params, occ);
        MeanFieldRhs {
            dc: det.delta_c_tilde,
            ds: det.delta_s_tilde,
            kappa: params.kappa_c,
            n_c_th: occ.n_c_th,
            up_rate: occ.n_s_th * params.gamma_s,
            relax: population_relaxation_rate(params, occ),
            dephase: params.chi_s,
            g: params.g_s,
            n: params.n_spins,
            drive: drive_amplitude * params.drive_coupling(),
        }
    }

    /// Same coefficients with a different drive amplitude.
    pub fn with_drive(&self, params: &SystemParams, drive_amplitude: f64) -> Self {
        MeanFieldRhs { drive: drive_amplitude * params.drive_coupling(), ..*self }
    }

    /// Evaluates the twelve right-hand sides.
    pub fn eval(&self, y: &[Complex64]) -> [Complex64; 12] {
        let i = Complex64::i();
        let (dc, ds) = (self.dc, self.ds);
        let (g, n, eps) = (self.g, self.n, self.drive);
        let up = self.up_rate;
        let relax = self.relax;

        let a = y[0];
        let ad = a.conj();
        let s = y[1];
        let sd = s.conj();
        let p = y[2];
        let nph = y[3];
        let aa = y[4];
        let x = y[5]; // <a^+ s12>
        let w = y[6]; // <a^+ s22>
        let z = y[7]; // <a s12>
        let c9 = y[8];
        let c10 = y[9];
        let c11 = y[10];
        let c12 = y[11];

        // <a^+ s22_1 s12_2>; its conjugate is <a s21_1 s22_2>.
        let t = ad * c10.conj() + s * w + p * x - 2.0 * ad * s * p;
        let t_minus_conj = Complex64::new(0.0, 2.0 * t.im);
        let x_minus_conj = Complex64::new(0.0, 2.0 * x.im);

        let mut dy = [Complex64::new(0.0, 0.0); 12];

        dy[0] = -i * dc * a - i * eps - i * n * g * s;

        dy[1] = -i * ds * s - i * g * a + 2.0 * i * g * w.conj();

        dy[2] = Complex64::new(up, 0.0) - relax * p + i * g * x_minus_conj;

        dy[3] = self.kappa * (self.n_c_th - nph) + i * eps * Complex64::new(0.0, 2.0 * a.im)
            - i * n * g * x_minus_conj;

        dy[4] = -2.0 * i * dc * aa - 2.0 * i * eps * a - 2.0 * i * n * g * z;

        dy[5] = i * (dc.conj() - ds) * x + i * eps * s + i * g * (p + (n - 1.0) * c9) - i * g * nph
            + 2.0 * i * g * (ad * w.conj() + a * w + p * nph - 2.0 * ad * a * p);

        // Damped detuning on the photon factor; <a^+ a^+ s12> closes on <a^+>^2.
        let ad_ad_s12 = 2.0 * ad * x + s * aa.conj() - 2.0 * s * ad * ad;
        let ad_a_s21 = ad * x.conj() + a * z.conj() + sd * nph - 2.0 * ad * a * sd;
        dy[6] = (i * dc.conj() - relax) * w + up * ad + i * eps * p + i * g * (n - 1.0) * c10
            + i * g * ad_ad_s12
            - i * g * ad_a_s21;

        // <a s12> carries the photon decay of <a>, i.e. the undamped-conjugate
        // detuning Delta_c~ (not Delta_c~*).
        dy[7] = -i * (dc + ds) * z - i * eps * s - i * g * (aa + (n - 1.0) * c11)
            + 2.0 * i * g * (p * aa + 2.0 * a * w.conj() - 2.0 * p * a * a);

        dy[8] = -(relax + 2.0 * self.dephase) * c9 + i * g * x_minus_conj - 2.0 * i * g * t_minus_conj;

        let ad_s12_s21 = ad * c9 + sd * x + s * z.conj() - 2.0 * ad * sd * s;
        let ad_s22_s22 = ad * c12 + 2.0 * p * w - 2.0 * ad * p * p;
        let a_s21_s21 = a * c11.conj() + 2.0 * sd * x.conj() - 2.0 * a * sd * sd;
        dy[9] = (i * ds.conj() - relax) * c10 + up * sd + i * g * ad_s12_s21 - 2.0 * i * g * ad_s22_s22
            - i * g * a_s21_s21
            + i * g * w;

        let a_s22_s12 = a * c10.conj() + s * w.conj() + p * z - 2.0 * a * s * p;
        dy[10] = -2.0 * i * ds * c11 - 2.0 * i * g * z + 4.0 * i * g * a_s22_s12;

        dy[11] = -2.0 * relax * c12 + 2.0 * up * p + 2.0 * i * g * t_minus_conj;

        dy
    }
}

/// Appendix-style right-hand side for one state, validating inputs.
pub fn derivative(
    state: &CumulantState,
    params: &SystemParams,
    drive_amplitude: f64,
) -> Result<StateDerivative> {
    if !state.is_finite() {
        return Err(Error::NonFiniteState);
    }
    params.validate()?;
    let occ = params.occupancies()?;
    Ok(StateDerivative(MeanFieldRhs::new(params, &occ, drive_amplitude).eval(state.as_slice())))
}

/// Mean-field right-hand side driven by a piecewise-constant protocol.
#[derive(Debug, Clone)]
pub struct ProtocolRhs {
    base: MeanFieldRhs,
    params: SystemParams,
    protocol: DriveProtocol,
}

impl ProtocolRhs {
    pub fn new(params: &SystemParams, protocol: DriveProtocol) -> Result<Self> {
        params.validate()?;
        let occ = params.occupancies()?;
        Ok(ProtocolRhs { base: MeanFieldRhs::new(params, &occ, 0.0), params: *params, protocol })
    }

    pub fn segment_rhs(&self, amplitude: f64) -> MeanFieldRhs {
        self.base.with_drive(&self.params, amplitude)
    }

    pub fn protocol(&self) -> &DriveProtocol {
        &self.protocol
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }
}

/// Single-spin steady upper population n_th gamma / (eta + gamma(1 + 2 n_th)).
pub fn single_spin_steady_population(params: &SystemParams, occ: &ThermalOccupancies) -> Result<f64> {
    let denom = population_relaxation_rate(params, occ);
    if !(denom > 0.0) {
        return Err(Error::UndampedSpin);
    }
    Ok(occ.n_s_th * params.gamma_s / denom)
}

/// Dicke coordinates of N independent spins with upper population `p`.
///
/// M = (N/2)(2p - 1) and J is the non-negative root of
/// J(J+1) = (2p-1)^2 J0(J0+1) + 6 p (1-p) J0, J0 = N/2, which equals <J^2>
/// of the product state.
pub fn dicke_from_population(p: f64, n_spins: f64) -> Result<DickeCoordinates> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("{p} outside [0, 1]")));
    }
    let j0 = 0.5 * n_spins;
    let inversion = 2.0 * p - 1.0;
    let jj1 = inversion * inversion * j0 * (j0 + 1.0) + 6.0 * p * (1.0 - p) * j0;
    Ok(DickeCoordinates { j: root_of_jj1(jj1), m: j0 * inversion })
}

/// Non-negative root of J(J+1) = x, written to avoid cancellation.
pub fn root_of_jj1(x: f64) -> f64 {
    2.0 * x / (1.0 + (1.0 + 4.0 * x).sqrt())
}

/// Radicand 3N/4 + N(N-1)(<s21 s12> + <s22 s22> - <s22> + 1/4) = <J^2>.
pub fn collective_spin_squared(state: &CumulantState, n_spins: f64) -> f64 {
    let c9 = state.get(Slot::S21S12).re;
    let c12 = state.get(Slot::S22S22).re;
    let p = state.get(Slot::S22).re;
    0.75 * n_spins + n_spins * (n_spins - 1.0) * (c9 + (c12 - p + 0.25))
}

/// Dicke coordinates from the cumulant slots: M = N(<s22> - 1/2), J = sqrt(<J^2>).
///
/// Slightly negative radicands (above -1e-9 N^2) are clipped to zero.
pub fn dicke_from_cumulants(state: &CumulantState, n_spins: f64) -> Result<DickeCoordinates> {
    let mut radicand = collective_spin_squared(state, n_spins);
    if radicand < 0.0 {
        if radicand < -1e-9 * n_spins * n_spins {
            return Err(Error::UnphysicalState { radicand, n_spins });
        }
        radicand = 0.0;
    }
    Ok(DickeCoordinates {
        j: radicand.sqrt(),
        m: n_spins * (state.get(Slot::S22).re - 0.5),
    })
}

/// Uncoupled fixed point: thermal photons, steady spin population, and the
/// matching product-state pair population p^2. Everything else vanishes.
pub fn thermal_equilibrium_state(params: &SystemParams, occ: &ThermalOccupancies) -> Result<CumulantState> {
    let p = single_spin_steady_population(params, occ)?;
    let mut slots = [Complex64::new(0.0, 0.0); 12];
    slots[Slot::AdA.index()] = Complex64::new(occ.n_c_th, 0.0);
    slots[Slot::S22.index()] = Complex64::new(p, 0.0);
    slots[Slot::S22S22.index()] = Complex64::new(p * p, 0.0);
    CumulantState::new(slots)
}
