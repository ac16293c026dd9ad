//! Exact simulation of a few three-level atoms and one probe mode, without the
//! collective bosonic approximation.
//!
//! States are products of a photon number and per-atom levels, truncated to a
//! bounded total excitation number `n + #a + #c`. The Hamiltonian conserves
//! that number, so the truncation is exact on every sector it keeps.

mod basis;
mod compare;

use nalgebra::DMatrix;

use crate::error::{domain, Error, Result};
use crate::model::C64;

pub use basis::{sector_dimension, Level, ProductState, SectorBasis};
pub use compare::{compare_to_bosonic, contiguous_partition, DiscrepancyReport};

pub const MAX_ATOMS: usize = 12;
pub const MAX_DIMENSION: usize = 50_000;
/// Largest dimension for which dense matrices are handed out.
pub const MAX_DENSE_DIMENSION: usize = 2_000;

/// Few-atom register with per-atom couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactRegister {
    probe_couplings: Vec<f64>,
    control_weights: Vec<f64>,
    phases: Vec<f64>,
    max_photons: usize,
    max_excitations: usize,
}

impl ExactRegister {
    pub fn new(probe_couplings: Vec<f64>, control_weights: Vec<f64>) -> Result<Self> {
        let n = probe_couplings.len();
        Self::with_phases(probe_couplings, control_weights, vec![0.0; n], 1, 1)
    }

    /// `phases[j]` dresses atom `j`'s probe coupling as `g_j·e^{iφ_j}`.
    pub fn with_phases(
        probe_couplings: Vec<f64>,
        control_weights: Vec<f64>,
        phases: Vec<f64>,
        max_photons: usize,
        max_excitations: usize,
    ) -> Result<Self> {
        let atoms = probe_couplings.len();
        if atoms == 0 {
            return Err(domain("register needs at least one atom"));
        }
        if control_weights.len() != atoms || phases.len() != atoms {
            return Err(domain("per-atom coupling, weight and phase lists differ in length"));
        }
        if probe_couplings.iter().chain(&control_weights).chain(&phases).any(|x| !x.is_finite()) {
            return Err(domain("per-atom parameters must be finite"));
        }
        if probe_couplings.iter().any(|&g| g < 0.0) || control_weights.iter().any(|&w| w < 0.0) {
            return Err(domain("per-atom couplings must be nonnegative"));
        }
        let dimension = sector_dimension(atoms, max_excitations, max_photons);
        if atoms > MAX_ATOMS || dimension > MAX_DIMENSION as u128 {
            return Err(Error::DimensionOverBudget {
                atoms,
                excitations: max_excitations,
                dimension,
                atom_limit: MAX_ATOMS,
                state_limit: MAX_DIMENSION,
            });
        }
        Ok(Self { probe_couplings, control_weights, phases, max_photons, max_excitations })
    }

    pub fn with_caps(mut self, max_photons: usize, max_excitations: usize) -> Result<Self> {
        let atoms = self.atoms();
        let dimension = sector_dimension(atoms, max_excitations, max_photons);
        if dimension > MAX_DIMENSION as u128 {
            return Err(Error::DimensionOverBudget {
                atoms,
                excitations: max_excitations,
                dimension,
                atom_limit: MAX_ATOMS,
                state_limit: MAX_DIMENSION,
            });
        }
        self.max_photons = max_photons;
        self.max_excitations = max_excitations;
        Ok(self)
    }

    pub fn atoms(&self) -> usize {
        self.probe_couplings.len()
    }

    pub fn probe_couplings(&self) -> &[f64] {
        &self.probe_couplings
    }

    pub fn control_weights(&self) -> &[f64] {
        &self.control_weights
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    pub fn max_excitations(&self) -> usize {
        self.max_excitations
    }

    pub fn dimension(&self) -> usize {
        sector_dimension(self.atoms(), self.max_excitations, self.max_photons) as usize
    }

    pub fn basis(&self) -> SectorBasis {
        SectorBasis::new(self.atoms(), self.max_excitations, self.max_photons)
    }
}

/// Compressed sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("duplicate follows an entry") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `out += scale·M·v`.
    pub fn mul_add(&self, scale: C64, v: &[C64], out: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * v[self.cols[k]];
            }
            out[r] += scale * acc;
        }
    }

    /// Largest absolute row sum, an upper bound on the spectral norm of a Hermitian matrix.
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.dim)
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|k| self.vals[k].norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] += self.vals[k];
            }
        }
        m
    }
}

/// `H(f) = probe + f·control` on the truncated product basis.
#[derive(Debug, Clone)]
pub struct ExactHamiltonian {
    pub basis: SectorBasis,
    pub probe: SparseMatrix,
    pub control: SparseMatrix,
}

impl ExactHamiltonian {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Dense `H(f)`; refused above [`MAX_DENSE_DIMENSION`].
    pub fn matrix(&self, f: f64) -> Result<DMatrix<C64>> {
        if self.dim() > MAX_DENSE_DIMENSION {
            return Err(domain(format!(
                "dense matrix requested for dimension {} (limit {MAX_DENSE_DIMENSION})",
                self.dim()
            )));
        }
        Ok(self.probe.to_dense() + self.control.to_dense() * C64::new(f, 0.0))
    }
}

/// Builds the per-atom interaction Hamiltonian, resonant and in the rotating frame:
/// `Σ_j g_j(e^{iφ_j} σ_ab^j a + h.c.) + f·Σ_j w_j(σ_ac^j + σ_ca^j)`.
pub fn build_exact(register: &ExactRegister) -> Result<ExactHamiltonian> {
    let basis = register.basis();
    let atoms = register.atoms();
    let dim = basis.len();
    let mut probe = Vec::new();
    let mut control = Vec::new();
    for (col, state) in basis.states().iter().enumerate() {
        for j in 0..atoms {
            let g = register.probe_couplings[j];
            let phase = C64::from_polar(1.0, register.phases[j]);
            match state.level(j) {
                Level::B if state.photons > 0 => {
                    // σ_ab^j a: absorb a photon, b → a
                    let target = state.with_level(j, Level::A).with_photons(state.photons - 1);
                    if let Some(row) = basis.index_of(&target) {
                        probe.push((row, col, phase * g * (state.photons as f64).sqrt()));
                    }
                }
                Level::A => {
                    let target = state.with_level(j, Level::B).with_photons(state.photons + 1);
                    if let Some(row) = basis.index_of(&target) {
                        probe.push((row, col, phase.conj() * g * ((state.photons + 1) as f64).sqrt()));
                    }
                    let to_c = state.with_level(j, Level::C);
                    if let Some(row) = basis.index_of(&to_c) {
                        control.push((row, col, C64::new(register.control_weights[j], 0.0)));
                    }
                }
                Level::C => {
                    let to_a = state.with_level(j, Level::A);
                    if let Some(row) = basis.index_of(&to_a) {
                        control.push((row, col, C64::new(register.control_weights[j], 0.0)));
                    }
                }
                Level::B => {}
            }
        }
    }
    Ok(ExactHamiltonian {
        probe: SparseMatrix::from_triplets(dim, probe),
        control: SparseMatrix::from_triplets(dim, control),
        basis,
    })
}

/// Collective operators of every group, as dense matrices on the sector basis.
///
/// Lowering operators are exact on the truncated basis; their adjoints drop
/// any amplitude pushed past the excitation cap.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    /// `Â_σ = N_σ^{-1/2} Σ_{j∈σ} e^{-iφ_j} σ_ba^j`.
    pub a: Vec<DMatrix<C64>>,
    /// `Ĉ_σ = N_σ^{-1/2} Σ_{j∈σ} e^{-iφ_j} σ_bc^j`.
    pub c: Vec<DMatrix<C64>>,
    /// `T̂+_σ = Σ_{j∈σ} σ_ac^j`.
    pub t_plus: Vec<DMatrix<C64>>,
    /// `T̂−_σ = Σ_{j∈σ} σ_ca^j`.
    pub t_minus: Vec<DMatrix<C64>>,
    /// `T̂z_σ = Σ_{j∈σ} (σ_aa^j − σ_cc^j)/2`.
    pub t_z: Vec<DMatrix<C64>>,
    /// Photon annihilation `a`.
    pub photon: DMatrix<C64>,
}

fn check_partition(atoms: usize, partition: &[Vec<usize>]) -> Result<()> {
    if partition.is_empty() {
        return Err(domain("partition has no groups"));
    }
    let mut seen = vec![false; atoms];
    for (g, group) in partition.iter().enumerate() {
        if group.is_empty() {
            return Err(domain(format!("group {} of the partition is empty", g + 1)));
        }
        for &j in group {
            if j >= atoms {
                return Err(domain(format!("atom {j} is outside a {atoms}-atom register")));
            }
            if seen[j] {
                return Err(domain(format!("atom {j} appears twice in the partition")));
            }
            seen[j] = true;
        }
    }
    if let Some(j) = seen.iter().position(|s| !s) {
        return Err(domain(format!("atom {j} is not in any group")));
    }
    Ok(())
}

/// Single-atom flip `|to⟩⟨from|` summed over `atoms` with per-atom `weights`.
fn flip_sum(basis: &SectorBasis, atoms: &[usize], from: Level, to: Level, weights: &[C64]) -> DMatrix<C64> {
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (col, state) in basis.states().iter().enumerate() {
        for (&j, &w) in atoms.iter().zip(weights) {
            if state.level(j) == from {
                if let Some(row) = basis.index_of(&state.with_level(j, to)) {
                    m[(row, col)] += w;
                }
            }
        }
    }
    m
}

pub fn collective_operators(register: &ExactRegister, partition: &[Vec<usize>]) -> Result<CollectiveOps> {
    check_partition(register.atoms(), partition)?;
    if register.dimension() > MAX_DENSE_DIMENSION {
        return Err(domain(format!(
            "collective operators are dense; dimension {} exceeds {MAX_DENSE_DIMENSION}",
            register.dimension()
        )));
    }
    let basis = register.basis();
    let dim = basis.len();
    let mut ops = CollectiveOps {
        a: Vec::new(),
        c: Vec::new(),
        t_plus: Vec::new(),
        t_minus: Vec::new(),
        t_z: Vec::new(),
        photon: DMatrix::zeros(dim, dim),
    };
    for group in partition {
        let norm = 1.0 / (group.len() as f64).sqrt();
        let dressed: Vec<C64> = group.iter().map(|&j| C64::from_polar(norm, -register.phases[j])).collect();
        let ones = vec![C64::new(1.0, 0.0); group.len()];
        ops.a.push(flip_sum(&basis, group, Level::A, Level::B, &dressed));
        ops.c.push(flip_sum(&basis, group, Level::C, Level::B, &dressed));
        ops.t_plus.push(flip_sum(&basis, group, Level::C, Level::A, &ones));
        ops.t_minus.push(flip_sum(&basis, group, Level::A, Level::C, &ones));
        let mut tz = DMatrix::zeros(dim, dim);
        for (i, s) in basis.states().iter().enumerate() {
            let a = group.iter().filter(|&&j| s.level(j) == Level::A).count() as f64;
            let c = group.iter().filter(|&&j| s.level(j) == Level::C).count() as f64;
            tz[(i, i)] = C64::new(0.5 * (a - c), 0.0);
        }
        ops.t_z.push(tz);
    }
    for (col, state) in basis.states().iter().enumerate() {
        if state.photons > 0 {
            if let Some(row) = basis.index_of(&state.with_photons(state.photons - 1)) {
                ops.photon[(row, col)] = C64::new((state.photons as f64).sqrt(), 0.0);
            }
        }
    }
    Ok(ops)
}

/// `[x, y] = xy − yx`.
pub fn commutator(x: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
    x * y - y * x
}

/// Total excitation number `n + #a + #c` as a diagonal matrix.
pub fn excitation_operator(basis: &SectorBasis) -> DMatrix<C64> {
    let dim = basis.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (i, s) in basis.states().iter().enumerate() {
        m[(i, i)] = C64::new(s.excitations(basis.atoms) as f64, 0.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn eigenvalues(h: DMatrix<C64>) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    #[test]
    fn single_atom_lambda_spectrum() {
        let (g, w, f) = (0.7, 1.3, 0.9);
        let h = build_exact(&ExactRegister::new(vec![g], vec![w]).unwrap()).unwrap();
        assert_eq!(h.dim(), 4);
        let ev = eigenvalues(h.matrix(f).unwrap());
        let e = (g * g + (w * f) * (w * f)).sqrt();
        let expected = [-e, 0.0, 0.0, e];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{ev:?}");
        }
    }

    #[test]
    fn antisymmetric_spin_wave_decouples() {
        let h = build_exact(&ExactRegister::new(vec![0.5, 0.5], vec![1.0, 1.0]).unwrap()).unwrap();
        let m = h.matrix(0.8).unwrap();
        let basis = &h.basis;
        let idx = |atom: usize, level: Level| basis.index_of(&ProductState::ground(0).with_level(atom, level)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // (A⁻ + C⁻)/√2 with A⁻ = (|a1⟩ − |a2⟩)/√2, C⁻ likewise: eigenvalue +w·f
        let mut v = nalgebra::DVector::<C64>::zeros(basis.len());
        v[idx(0, Level::A)] = C64::new(0.5, 0.0);
        v[idx(1, Level::A)] = C64::new(-0.5, 0.0);
        v[idx(0, Level::C)] = C64::new(0.5, 0.0);
        v[idx(1, Level::C)] = C64::new(-0.5, 0.0);
        let hv = &m * &v;
        assert!((hv - &v * C64::new(0.8, 0.0)).norm() < 1e-15);
        let photon = basis.index_of(&ProductState::ground(1)).unwrap();
        assert_eq!(m[(photon, idx(0, Level::A))] - m[(photon, idx(1, Level::A))], C64::new(0.0, 0.0));
        assert!(s > 0.0);
    }

    #[test]
    fn hermitian_and_number_conserving() {
        let reg = ExactRegister::with_phases(
            vec![0.3, 0.5, 0.2, 0.4],
            vec![1.0, 0.8, 1.2, 1.1],
            vec![0.1, -0.4, 2.0, 0.0],
            2,
            2,
        )
        .unwrap();
        let h = build_exact(&reg).unwrap();
        let m = h.matrix(0.6).unwrap();
        assert_eq!(m.adjoint(), m);
        let n = excitation_operator(&h.basis);
        assert_eq!(commutator(&m, &n).iter().map(|z| z.norm()).fold(0.0, f64::max), 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let err = ExactRegister::new(vec![0.1; 20], vec![1.0; 20]).unwrap_err();
        assert!(matches!(err, Error::DimensionOverBudget { atoms: 20, dimension: 42, .. }));
        assert!(err.to_string().starts_with("dimension over budget"));
        assert!(ExactRegister::new(vec![0.1; 12], vec![1.0; 12]).unwrap().with_caps(6, 6).is_err());
    }

    #[test]
    fn partition_validation() {
        let reg = ExactRegister::new(vec![0.1; 4], vec![1.0; 4]).unwrap();
        assert!(collective_operators(&reg, &[vec![0, 1], vec![]]).is_err());
        assert!(collective_operators(&reg, &[vec![0, 1], vec![1, 2, 3]]).is_err());
        assert!(collective_operators(&reg, &[vec![0, 1], vec![2]]).is_err());
        assert!(collective_operators(&reg, &[vec![0, 1], vec![2, 3]]).is_ok());
    }

    #[test]
    fn bosonic_commutator_on_vacuum() {
        let reg = ExactRegister::new(vec![0.1; 5], vec![1.0; 5]).unwrap();
        let ops = collective_operators(&reg, &[vec![0, 1, 2], vec![3, 4]]).unwrap();
        for s in 0..2 {
            let comm = commutator(&ops.a[s], &ops.a[s].adjoint());
            assert!((comm[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn tz_is_half_integer_diagonal() {
        let reg = ExactRegister::new(vec![0.1; 4], vec![1.0; 4]).unwrap().with_caps(2, 3).unwrap();
        let ops = collective_operators(&reg, &[vec![0, 1, 2, 3]]).unwrap();
        let tz = &ops.t_z[0];
        for i in 0..tz.nrows() {
            for j in 0..tz.ncols() {
                if i != j {
                    assert_eq!(tz[(i, j)], C64::new(0.0, 0.0));
                } else {
                    assert_eq!((2.0 * tz[(i, i)].re).fract(), 0.0);
                }
            }
        }
    }
}
