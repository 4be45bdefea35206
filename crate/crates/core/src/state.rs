//! The twelve closed first/second-order expectation values and the Dicke
//! coordinates derived from them.
//!
//! Operator convention: `s12` is the spin lowering operator |lower><upper|,
//! `s21` raising, `s22` the upper-level projector. Pair slots refer to two
//! distinct representative spins (1, 2); exchange symmetry makes one pair
//! stand for all N(N-1) of them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slot names, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slot {
    /// <a>
    A = 0,
    /// <s12_1>
    S12,
    /// <s22_1>
    S22,
    /// <a^+ a>
    AdA,
    /// <a a>
    AA,
    /// <a^+ s12_1>
    AdS12,
    /// <a^+ s22_1>
    AdS22,
    /// <a s12_1>
    AS12,
    /// <s21_1 s12_2>
    S21S12,
    /// <s22_1 s21_2>
    S22S21,
    /// <s12_1 s12_2>
    S12S12,
    /// <s22_1 s22_2>
    S22S22,
}

impl Slot {
    pub const ALL: [Slot; 12] = [
        Slot::A,
        Slot::S12,
        Slot::S22,
        Slot::AdA,
        Slot::AA,
        Slot::AdS12,
        Slot::AdS22,
        Slot::AS12,
        Slot::S21S12,
        Slot::S22S21,
        Slot::S12S12,
        Slot::S22S22,
    ];

    /// Slots that are expectation values of hermitian operators.
    pub const REAL: [Slot; 4] = [Slot::S22, Slot::AdA, Slot::S21S12, Slot::S22S22];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Slot::A => "a",
            Slot::S12 => "s12",
            Slot::S22 => "s22",
            Slot::AdA => "ad_a",
            Slot::AA => "a_a",
            Slot::AdS12 => "ad_s12",
            Slot::AdS22 => "ad_s22",
            Slot::AS12 => "a_s12",
            Slot::S21S12 => "s21_s12",
            Slot::S22S21 => "s22_s21",
            Slot::S12S12 => "s12_s12",
            Slot::S22S22 => "s22_s22",
        }
    }

    /// First-order (mean-field) slots.
    pub fn is_first_order(self) -> bool {
        matches!(self, Slot::A | Slot::S12 | Slot::S22)
    }
}

/// Absolute imaginary part tolerated on a real slot at construction,
/// relative to the slot magnitude.
const HERMITICITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantState {
    slots: [Complex64; 12],
}

impl Default for CumulantState {
    fn default() -> Self {
        CumulantState { slots: [Complex64::new(0.0, 0.0); 12] }
    }
}

impl CumulantState {
    /// Validated constructor: real slots must be real (their imaginary parts
    /// are zeroed if within round-off) and 0 <= <s22> <= 1.
    pub fn new(mut slots: [Complex64; 12]) -> Result<Self> {
        if slots.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        for slot in Slot::REAL {
            let z = slots[slot.index()];
            if z.im.abs() > HERMITICITY_TOL * z.re.abs().max(1.0) {
                return Err(Error::InvalidState(format!(
                    "slot {} has imaginary part {:e}",
                    slot.label(),
                    z.im
                )));
            }
            slots[slot.index()].im = 0.0;
        }
        let p = slots[Slot::S22.index()].re;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidState(format!("upper population {p} outside [0, 1]")));
        }
        Ok(CumulantState { slots })
    }

    /// Unchecked constructor for states produced by time stepping.
    pub fn from_slots(slots: [Complex64; 12]) -> Self {
        CumulantState { slots }
    }

    pub fn from_slice(values: &[Complex64]) -> Self {
        let mut slots = [Complex64::new(0.0, 0.0); 12];
        slots.copy_from_slice(&values[..12]);
        CumulantState { slots }
    }

    pub fn vacuum() -> Self {
        Self::default()
    }

    pub fn get(&self, slot: Slot) -> Complex64 {
        self.slots[slot.index()]
    }

    pub fn set(&mut self, slot: Slot, value: Complex64) {
        self.slots[slot.index()] = value;
    }

    pub fn with(mut self, slot: Slot, value: Complex64) -> Self {
        self.set(slot, value);
        self
    }

    pub fn slots(&self) -> &[Complex64; 12] {
        &self.slots
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.slots
    }

    pub fn is_finite(&self) -> bool {
        self.slots.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Mean photon number <a^+ a>.
    pub fn photon_number(&self) -> f64 {
        self.get(Slot::AdA).re
    }

    pub fn upper_population(&self) -> f64 {
        self.get(Slot::S22).re
    }

    /// Largest |Im| over the four hermitian slots, each relative to max(1, |Re|).
    pub fn hermiticity_residue(&self) -> f64 {
        Slot::REAL
            .iter()
            .map(|&s| {
                let z = self.get(s);
                z.im.abs() / z.re.abs().max(1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Location (J, M) of the ensemble in the Dicke triangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DickeCoordinates {
    pub j: f64,
    pub m: f64,
}

impl DickeCoordinates {
    /// Checks |M| <= J <= N/2 up to `rel_tol * N`.
    pub fn within_triangle(&self, n_spins: f64, rel_tol: f64) -> bool {
        let tol = rel_tol * n_spins;
        self.j >= -tol && self.j <= 0.5 * n_spins + tol && self.m.abs() <= self.j + tol
    }
}
