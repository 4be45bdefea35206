//! Exact density-matrix reference for a handful of spins and a truncated
//! Fock space, in the same rotating frame as the mean-field equations.
//!
//! Basis index = fock + (cutoff + 1) * spins, where bit j of `spins` set
//! means spin j is in the upper level.

mod liouvillian;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use liouvillian::{build_liouvillian, Liouvillian, SparseOp};

use crate::error::{Error, Result};
use crate::integrator::{Dopri5, IntegrationConfig};
use crate::state::{CumulantState, Slot};

/// Largest total dimension the oracle accepts.
pub const MAX_DIMENSION: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertLayout {
    n_spins: usize,
    fock_cutoff: usize,
}

impl HilbertLayout {
    pub fn new(n_spins: usize, fock_cutoff: usize) -> Result<Self> {
        if !(1..=4).contains(&n_spins) {
            return Err(Error::param("n_spins_exact", format!("{n_spins} outside 1..=4")));
        }
        if fock_cutoff < 2 {
            return Err(Error::param("fock_cutoff", format!("{fock_cutoff} < 2")));
        }
        let dim = (1usize << n_spins) * (fock_cutoff + 1);
        if dim > MAX_DIMENSION {
            return Err(Error::DimensionGuard { dim, max: MAX_DIMENSION });
        }
        Ok(HilbertLayout { n_spins, fock_cutoff })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn fock_cutoff(&self) -> usize {
        self.fock_cutoff
    }

    pub fn fock_levels(&self) -> usize {
        self.fock_cutoff + 1
    }

    pub fn dim(&self) -> usize {
        (1usize << self.n_spins) * self.fock_levels()
    }

    pub fn index(&self, fock: usize, spins: usize) -> usize {
        fock + self.fock_levels() * spins
    }

    /// (fock, spins) of a basis index.
    pub fn split(&self, index: usize) -> (usize, usize) {
        (index % self.fock_levels(), index / self.fock_levels())
    }

    /// Annihilation operator a.
    pub fn annihilation(&self) -> SparseOp {
        let mut op = SparseOp::new(self.dim());
        for spins in 0..(1 << self.n_spins) {
            for n in 1..self.fock_levels() {
                op.push(self.index(n - 1, spins), self.index(n, spins), Complex64::new((n as f64).sqrt(), 0.0));
            }
        }
        op
    }

    /// |m><n| on spin `j`, with levels 1 = lower and 2 = upper.
    pub fn sigma(&self, j: usize, m: u8, n: u8) -> SparseOp {
        assert!(j < self.n_spins && (1..=2).contains(&m) && (1..=2).contains(&n));
        let bit = 1usize << j;
        let mut op = SparseOp::new(self.dim());
        for spins in 0..(1 << self.n_spins) {
            let upper = spins & bit != 0;
            if upper != (n == 2) {
                continue;
            }
            let target = if m == 2 { spins | bit } else { spins & !bit };
            for f in 0..self.fock_levels() {
                op.push(self.index(f, target), self.index(f, spins), Complex64::new(1.0, 0.0));
            }
        }
        op
    }
}

/// Trace-normalized hermitian density matrix over a [`HilbertLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    layout: HilbertLayout,
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    /// Validated constructor: hermitian to 1e-12, unit trace to 1e-10,
    /// eigenvalues >= -1e-9.
    pub fn new(layout: HilbertLayout, rho: DMatrix<Complex64>) -> Result<Self> {
        let dim = layout.dim();
        if rho.nrows() != dim || rho.ncols() != dim {
            return Err(Error::InvalidState(format!("matrix is {}x{}, layout needs {dim}", rho.nrows(), rho.ncols())));
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        let dm = DensityMatrix { layout, rho };
        let herm = dm.hermiticity_error();
        if herm > 1e-12 {
            return Err(Error::InvalidState(format!("density matrix not hermitian ({herm:e})")));
        }
        let tr = dm.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = dm.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(dm)
    }

    fn from_raw(layout: HilbertLayout, rho: DMatrix<Complex64>) -> Self {
        DensityMatrix { layout, rho }
    }

    /// Cavity vacuum with every spin in the lower level.
    pub fn ground(layout: HilbertLayout) -> Self {
        let dim = layout.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        rho[(0, 0)] = Complex64::new(1.0, 0.0);
        DensityMatrix { layout, rho }
    }

    /// Truncated, renormalized thermal cavity state with mean `n_th` times
    /// independent spins of upper population `p`.
    pub fn thermal_product(layout: HilbertLayout, n_th: f64, p: f64) -> Result<Self> {
        if !(n_th >= 0.0) || !n_th.is_finite() {
            return Err(Error::param("n_th", format!("{n_th} must be finite and >= 0")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::param("p", format!("{p} outside [0, 1]")));
        }
        let ratio = if n_th > 0.0 { n_th / (1.0 + n_th) } else { 0.0 };
        let fock: Vec<f64> = (0..layout.fock_levels()).map(|k| ratio.powi(k as i32)).collect();
        let z: f64 = fock.iter().sum();
        let dim = layout.dim();
        let mut rho = DMatrix::zeros(dim, dim);
        for spins in 0..(1usize << layout.n_spins) {
            let ups = spins.count_ones() as i32;
            let w_spin = p.powi(ups) * (1.0 - p).powi(layout.n_spins as i32 - ups);
            for (k, &wf) in fock.iter().enumerate() {
                let i = layout.index(k, spins);
                rho[(i, i)] = Complex64::new(w_spin * wf / z, 0.0);
            }
        }
        Ok(DensityMatrix { layout, rho })
    }

    /// Pure state |psi><psi| (normalized here).
    pub fn pure(layout: HilbertLayout, psi: &[Complex64]) -> Result<Self> {
        if psi.len() != layout.dim() {
            return Err(Error::InvalidState("state vector has wrong length".into()));
        }
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let v = nalgebra::DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        let rho = &v * v.adjoint();
        DensityMatrix::new(layout, rho)
    }

    pub fn layout(&self) -> HilbertLayout {
        self.layout
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn purity(&self) -> f64 {
        // Tr(rho^2) = sum |rho_ij|^2 for hermitian rho.
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.rho.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.rho[(i, j)] - self.rho[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Tr(op rho).
    pub fn expect(&self, op: &SparseOp) -> Complex64 {
        op.entries().iter().map(|&(r, c, v)| v * self.rho[(c, r)]).sum()
    }

    /// Tr(op1 op2 rho) for sparse factors.
    pub fn expect_product(&self, op1: &SparseOp, op2: &SparseOp) -> Complex64 {
        self.expect(&op1.mul(op2))
    }

    /// Population of the highest Fock level kept.
    pub fn fock_tail(&self) -> f64 {
        let top = self.layout.fock_cutoff;
        (0..(1usize << self.layout.n_spins))
            .map(|s| {
                let i = self.layout.index(top, s);
                self.rho[(i, i)].re
            })
            .sum()
    }
}

/// Exact expectation values extracted from a density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleMoments {
    /// The twelve slots with spins 1, 2 as the representative pair (pair
    /// slots are zero for a single spin).
    pub slots: CumulantState,
    pub j_squared: f64,
    pub j_z: f64,
}

/// Spin and field operators reused by [`moments`].
struct MomentOps {
    a: SparseOp,
    ad: SparseOp,
    s12: Vec<SparseOp>,
    s21: Vec<SparseOp>,
    s22: Vec<SparseOp>,
}

impl MomentOps {
    fn new(layout: &HilbertLayout) -> Self {
        let a = layout.annihilation();
        let ad = a.adjoint();
        let n = layout.n_spins;
        MomentOps {
            a,
            ad,
            s12: (0..n).map(|j| layout.sigma(j, 1, 2)).collect(),
            s21: (0..n).map(|j| layout.sigma(j, 2, 1)).collect(),
            s22: (0..n).map(|j| layout.sigma(j, 2, 2)).collect(),
        }
    }
}

pub fn moments(rho: &DensityMatrix) -> OracleMoments {
    let layout = rho.layout;
    let ops = MomentOps::new(&layout);
    let n = layout.n_spins;
    let mut slots = [Complex64::new(0.0, 0.0); 12];
    slots[Slot::A.index()] = rho.expect(&ops.a);
    slots[Slot::S12.index()] = rho.expect(&ops.s12[0]);
    slots[Slot::S22.index()] = rho.expect(&ops.s22[0]);
    slots[Slot::AdA.index()] = rho.expect_product(&ops.ad, &ops.a);
    slots[Slot::AA.index()] = rho.expect_product(&ops.a, &ops.a);
    slots[Slot::AdS12.index()] = rho.expect_product(&ops.ad, &ops.s12[0]);
    slots[Slot::AdS22.index()] = rho.expect_product(&ops.ad, &ops.s22[0]);
    slots[Slot::AS12.index()] = rho.expect_product(&ops.a, &ops.s12[0]);
    if n >= 2 {
        slots[Slot::S21S12.index()] = rho.expect_product(&ops.s21[0], &ops.s12[1]);
        slots[Slot::S22S21.index()] = rho.expect_product(&ops.s22[0], &ops.s21[1]);
        slots[Slot::S12S12.index()] = rho.expect_product(&ops.s12[0], &ops.s12[1]);
        slots[Slot::S22S22.index()] = rho.expect_product(&ops.s22[0], &ops.s22[1]);
    }
    for s in Slot::REAL {
        slots[s.index()].im = 0.0;
    }

    // J^2 = J+ J- + Jz^2 - Jz with J- = sum s12, Jz = sum s22 - N/2.
    let mut jm = SparseOp::new(layout.dim());
    let mut jz = SparseOp::new(layout.dim());
    for j in 0..n {
        jm = jm.add(&ops.s12[j]);
        jz = jz.add(&ops.s22[j]);
    }
    let half_n = 0.5 * n as f64;
    let jz_mean = rho.expect(&jz).re - half_n;
    let jz_op = jz.add(&SparseOp::identity(layout.dim()).scale(Complex64::new(-half_n, 0.0)));
    let jp = jm.adjoint();
    let j_squared = (rho.expect_product(&jp, &jm) + rho.expect_product(&jz_op, &jz_op)).re - jz_mean;
    OracleMoments { slots: CumulantState::from_slots(slots), j_squared, j_z: jz_mean }
}

/// Time evolution of `rho0` under `liouvillian`, sampled on `t_grid`
/// (seconds, strictly increasing, starting at or after 0).
pub fn evolve(
    rho0: &DensityMatrix,
    liouvillian: &Liouvillian,
    t_grid: &[f64],
    config: &IntegrationConfig,
) -> Result<Vec<DensityMatrix>> {
    config.validate()?;
    if rho0.layout != liouvillian.layout() {
        return Err(Error::InvalidState("density matrix and Liouvillian layouts differ".into()));
    }
    for w in t_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::param("t_grid", "times must be strictly increasing"));
        }
    }
    if t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::param("t_grid", "times must be >= 0"));
    }
    let layout = rho0.layout;
    let dim = layout.dim();
    let mut out = Vec::with_capacity(t_grid.len());
    let mut grid = t_grid;
    while let Some((&t, rest)) = grid.split_first() {
        if t > 0.0 {
            break;
        }
        out.push(rho0.clone());
        grid = rest;
    }
    let Some(&t_end) = grid.last() else {
        return Ok(out);
    };
    let mut y: Vec<Complex64> = rho0.rho.transpose().iter().copied().collect();
    let mut stepper = Dopri5::new(*config, dim * dim);
    stepper.advance(liouvillian, 0.0, t_end, &mut y, grid, |_, v| {
        let m = DMatrix::from_row_slice(dim, dim, v);
        out.push(DensityMatrix::from_raw(layout, m));
    })?;
    Ok(out)
}

/// Evolution with the Fock cutoff chosen automatically: starting at
/// `initial_cutoff`, the cutoff is doubled until the top-level population
/// stays below `tail_tol` at every sample.
pub fn evolve_auto_cutoff<F>(
    n_spins: usize,
    initial_cutoff: usize,
    tail_tol: f64,
    t_grid: &[f64],
    config: &IntegrationConfig,
    mut setup: F,
) -> Result<Vec<DensityMatrix>>
where
    F: FnMut(HilbertLayout) -> Result<(DensityMatrix, Liouvillian)>,
{
    let mut cutoff = initial_cutoff.max(2);
    loop {
        let layout = HilbertLayout::new(n_spins, cutoff)?;
        let (rho0, l) = setup(layout)?;
        let traj = evolve(&rho0, &l, t_grid, config)?;
        let tail = traj.iter().map(DensityMatrix::fock_tail).fold(rho0.fock_tail(), f64::max);
        if tail < tail_tol {
            return Ok(traj);
        }
        cutoff *= 2;
    }
}
