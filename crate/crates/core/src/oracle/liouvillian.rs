use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{DensityMatrix, HilbertLayout};
use crate::error::Result;
use crate::integrator::OdeSystem;
use crate::model::SystemParams;

/// Sparse operator as a list of (row, col, value) triplets without duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOp {
    pub fn new(dim: usize) -> Self {
        SparseOp { dim, entries: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOp { dim, entries: (0..dim).map(|i| (i, i, Complex64::new(1.0, 0.0))).collect() }
    }

    fn from_map(dim: usize, map: BTreeMap<(usize, usize), Complex64>) -> Self {
        SparseOp {
            dim,
            entries: map.into_iter().filter(|(_, v)| *v != Complex64::new(0.0, 0.0)).map(|((r, c), v)| (r, c, v)).collect(),
        }
    }

    /// Appends an entry; the caller guarantees (row, col) is new.
    pub fn push(&mut self, row: usize, col: usize, value: Complex64) {
        self.entries.push((row, col, value));
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(usize, usize, Complex64)] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        SparseOp { dim: self.dim, entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect() }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        SparseOp { dim: self.dim, entries: self.entries.iter().map(|&(r, c, v)| (r, c, v * factor)).collect() }
    }

    pub fn add(&self, other: &SparseOp) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut map = BTreeMap::new();
        for &(r, c, v) in self.entries.iter().chain(&other.entries) {
            *map.entry((r, c)).or_insert(Complex64::new(0.0, 0.0)) += v;
        }
        SparseOp::from_map(self.dim, map)
    }

    /// Operator product self * other.
    pub fn mul(&self, other: &SparseOp) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut by_row: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); self.dim];
        for &(r, c, v) in &other.entries {
            by_row[r].push((c, v));
        }
        let mut map = BTreeMap::new();
        for &(r, k, v) in &self.entries {
            for &(c, w) in &by_row[k] {
                *map.entry((r, c)).or_insert(Complex64::new(0.0, 0.0)) += v * w;
            }
        }
        SparseOp::from_map(self.dim, map)
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }
}

/// Rotating-frame master-equation generator
/// L rho = -i[H, rho] + sum_k r_k (C_k rho C_k^+ - {C_k^+ C_k, rho}/2),
/// stored as H_eff = H - (i/2) sum_k r_k C_k^+ C_k plus the jump terms.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    layout: HilbertLayout,
    hamiltonian: SparseOp,
    h_eff: SparseOp,
    jumps: Vec<(f64, SparseOp)>,
}

/// Builds the generator for `layout.n_spins()` spins with the rates of
/// `params` (its `n_spins` is ignored) and drive amplitude `drive_amplitude`.
///
/// H = D_c a^+a + D_s sum s22 + g (a^+ sum s12 + a sum s21) + W (a + a^+),
/// W = drive_amplitude sqrt(kappa_1). Channels: kappa(1+n_c) on a, kappa n_c
/// on a^+, gamma(1+n_s) + eta on each s12, gamma n_s on each s21 and
/// 2 chi on each s22.
pub fn build_liouvillian(params: &SystemParams, layout: HilbertLayout, drive_amplitude: f64) -> Result<Liouvillian> {
    let mut check = *params;
    check.n_spins = layout.n_spins() as f64;
    check.validate()?;
    let occ = check.occupancies()?;
    let dim = layout.dim();
    let c = |x: f64| Complex64::new(x, 0.0);

    let a = layout.annihilation();
    let ad = a.adjoint();
    let mut h = ad.mul(&a).scale(c(params.delta_c()));
    let drive = drive_amplitude * params.drive_coupling();
    h = h.add(&a.add(&ad).scale(c(drive)));
    let mut jumps = vec![(params.kappa_c * (1.0 + occ.n_c_th), a.clone()), (params.kappa_c * occ.n_c_th, ad.clone())];
    for j in 0..layout.n_spins() {
        let s12 = layout.sigma(j, 1, 2);
        let s21 = layout.sigma(j, 2, 1);
        let s22 = layout.sigma(j, 2, 2);
        h = h.add(&s22.scale(c(params.delta_s())));
        h = h.add(&ad.mul(&s12).add(&a.mul(&s21)).scale(c(params.g_s)));
        jumps.push((params.gamma_s * (1.0 + occ.n_s_th) + params.eta_s, s12));
        jumps.push((params.gamma_s * occ.n_s_th, s21));
        jumps.push((2.0 * params.chi_s, s22));
    }
    jumps.retain(|(r, _)| *r > 0.0);

    let mut h_eff = h.clone();
    for (rate, op) in &jumps {
        h_eff = h_eff.add(&op.adjoint().mul(op).scale(Complex64::new(0.0, -0.5 * rate)));
    }
    debug_assert_eq!(h_eff.dim(), dim);
    Ok(Liouvillian { layout, hamiltonian: h, h_eff, jumps })
}

impl Liouvillian {
    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn hamiltonian(&self) -> &SparseOp {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[(f64, SparseOp)] {
        &self.jumps
    }

    /// L rho on a row-major flattened matrix.
    pub fn apply_flat(&self, rho: &[Complex64], out: &mut [Complex64]) {
        let d = self.layout.dim();
        let i = Complex64::i();
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for &(r, k, v) in self.h_eff.entries() {
            // -i H_eff rho
            let f = -i * v;
            let (src, dst) = (k * d, r * d);
            for col in 0..d {
                out[dst + col] += f * rho[src + col];
            }
        }
        for &(r, k, v) in self.h_eff.entries() {
            // +i rho H_eff^+ : (rho H^+)_{x r} = sum_k rho_{x k} conj(H_{r k})
            let f = i * v.conj();
            for row in 0..d {
                out[row * d + r] += f * rho[row * d + k];
            }
        }
        for (rate, op) in &self.jumps {
            // (C rho C^+)_{xy} = C_{xk} rho_{kl} conj(C_{yl})
            for &(x, k, v1) in op.entries() {
                let f = rate * v1;
                for &(y, l, v2) in op.entries() {
                    out[x * d + y] += f * rho[k * d + l] * v2.conj();
                }
            }
        }
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DMatrix<Complex64> {
        let d = self.layout.dim();
        let flat: Vec<Complex64> = rho.matrix().transpose().iter().copied().collect();
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        self.apply_flat(&flat, &mut out);
        DMatrix::from_row_slice(d, d, &out)
    }

    /// L applied to an arbitrary (not necessarily physical) matrix.
    pub fn apply_matrix(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let d = self.layout.dim();
        let flat: Vec<Complex64> = m.transpose().iter().copied().collect();
        let mut out = vec![Complex64::new(0.0, 0.0); d * d];
        self.apply_flat(&flat, &mut out);
        DMatrix::from_row_slice(d, d, &out)
    }
}

impl OdeSystem for Liouvillian {
    fn dim(&self) -> usize {
        let d = self.layout.dim();
        d * d
    }

    fn rhs(&self, _t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        self.apply_flat(y, dy);
    }
}
