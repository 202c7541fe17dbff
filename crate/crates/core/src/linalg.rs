//! Dense complex Hermitian linear algebra.
//!
//! Every matrix function goes through a full Hermitian eigendecomposition,
//! so identities between entropies and relative entropies hold to rounding.
//! Bipartite operators use the system-major index convention: basis index
//! `i * d_E + k` pairs system level `i` with environment level `k`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Relative Hermiticity tolerance applied at construction.
pub const TOL_HERM: f64 = 1e-12;
/// Trace tolerance for density matrices.
pub const TOL_TRACE: f64 = 1e-10;
/// Most negative eigenvalue accepted for a density matrix.
pub const TOL_PSD: f64 = 1e-10;
/// Max-norm tolerance on `U^dagger U - I`.
pub const TOL_UNITARY: f64 = 1e-10;

/// Validated square self-adjoint matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct HermitianMatrix {
    m: CMatrix,
}

impl HermitianMatrix {
    /// Validates and symmetrizes `m`.
    ///
    /// Deviations from self-adjointness up to [`TOL_HERM`] times the largest
    /// entry magnitude are absorbed by `(A + A^dagger) / 2`; anything larger
    /// is rejected.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!("matrix is not square: {}x{}", m.nrows(), m.ncols())));
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("matrix has dimension 0".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = max_abs(&m);
        let n = m.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        if worst > TOL_HERM * scale {
            return Err(Error::InvalidInput(format!("matrix is not Hermitian (deviation {worst:e}, scale {scale:e})")));
        }
        Ok(Self::symmetrized(m))
    }

    /// Symmetrizes without validation. Only for matrices Hermitian by construction.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let adj = m.adjoint();
        Self { m: (m + adj).scale(0.5) }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let m = CMatrix::from_fn(n, n, |i, j| if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) });
        Self::new(m)
    }

    /// Builds a matrix from row-major real and imaginary parts.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let n = re.len();
        if im.len() != n || re.iter().chain(im.iter()).any(|row| row.len() != n) {
            return Err(Error::InvalidInput("real/imaginary parts must be n x n".into()));
        }
        Self::new(CMatrix::from_fn(n, n, |i, j| C64::new(re[i][j], im[i][j])))
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.m)
    }

    pub fn eig(&self) -> Eigen {
        eig_hermitian(self)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        sorted_eigenvalues(&self.m)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m - &other.m })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { m: self.m.scale(c) }
    }

    /// Re tr[self * other].
    pub fn trace_product(&self, other: &Self) -> f64 {
        trace_of_product(&self.m, &other.m)
    }

    /// Sum of the absolute eigenvalues.
    pub fn trace_norm(&self) -> f64 {
        self.eigenvalues().iter().map(|l| l.abs()).sum()
    }

    pub fn kron(&self, other: &Self) -> Self {
        tensor_product(self, other)
    }
}

/// Row-major JSON encoding shared by every scenario and report file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    #[serde(default)]
    pub im: Option<Vec<Vec<f64>>>,
}

impl TryFrom<MatrixJson> for HermitianMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        if j.re.len() != j.dim {
            return Err(Error::InvalidInput(format!("matrix declares dim {} but has {} rows", j.dim, j.re.len())));
        }
        let im = j.im.unwrap_or_else(|| vec![vec![0.0; j.dim]; j.dim]);
        HermitianMatrix::from_parts(&j.re, &im)
    }
}

impl From<HermitianMatrix> for MatrixJson {
    fn from(h: HermitianMatrix) -> Self {
        let n = h.dim();
        let re = (0..n).map(|i| (0..n).map(|j| h.m[(i, j)].re).collect()).collect();
        let im = (0..n).map(|i| (0..n).map(|j| h.m[(i, j)].im).collect()).collect();
        MatrixJson { dim: n, re, im: Some(im) }
    }
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DensityMatrix {
    base: HermitianMatrix,
}

impl DensityMatrix {
    pub fn new(base: HermitianMatrix) -> Result<Self> {
        let tr = base.trace();
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(Error::InvalidState(format!("trace is {tr}, expected 1")));
        }
        let lmin = base.eigenvalues()[0];
        if lmin < -TOL_PSD {
            return Err(Error::InvalidState(format!("not positive semidefinite (smallest eigenvalue {lmin:e})")));
        }
        Ok(Self { base })
    }

    pub(crate) fn new_unchecked(base: HermitianMatrix) -> Self {
        Self { base }
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianMatrix::new(m)?)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { base: HermitianMatrix::identity(dim).scale(1.0 / dim as f64) }
    }

    /// Projector onto a normalized copy of `psi`.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if psi.is_empty() || !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidInput("state vector must be nonzero and finite".into()));
        }
        let n = psi.len();
        let m = CMatrix::from_fn(n, n, |i, j| psi[i] * psi[j].conj() / (norm * norm));
        Ok(Self { base: HermitianMatrix::symmetrized(m) })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn as_hermitian(&self) -> &HermitianMatrix {
        &self.base
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.base.m
    }

    pub fn into_hermitian(self) -> HermitianMatrix {
        self.base
    }

    /// Ascending eigenvalues, unclipped.
    pub fn spectrum(&self) -> Vec<f64> {
        self.base.eigenvalues()
    }

    /// Re tr[rho * obs].
    pub fn expectation(&self, obs: &HermitianMatrix) -> f64 {
        self.base.trace_product(obs)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { base: tensor_product(&self.base, &other.base) }
    }
}

impl TryFrom<MatrixJson> for DensityMatrix {
    type Error = Error;

    fn try_from(j: MatrixJson) -> Result<Self> {
        DensityMatrix::new(HermitianMatrix::try_from(j)?)
    }
}

impl From<DensityMatrix> for MatrixJson {
    fn from(d: DensityMatrix) -> Self {
        d.base.into()
    }
}

/// Which tensor factor a partial trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    System,
    Environment,
}

/// Joint state on `d_S * d_E` levels, system index major.
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteState {
    d_s: usize,
    d_e: usize,
    state: DensityMatrix,
}

impl BipartiteState {
    pub fn new(d_s: usize, d_e: usize, state: DensityMatrix) -> Result<Self> {
        if d_s == 0 {
            return Err(Error::InvalidInput("d_S must be positive".into()));
        }
        if d_e < 2 {
            return Err(Error::InvalidInput(format!("d_E must be at least 2, got {d_e}")));
        }
        if state.dim() != d_s * d_e {
            return Err(Error::InvalidInput(format!(
                "state has dimension {} but d_S * d_E = {}",
                state.dim(),
                d_s * d_e
            )));
        }
        Ok(Self { d_s, d_e, state })
    }

    pub(crate) fn new_unchecked(d_s: usize, d_e: usize, state: DensityMatrix) -> Self {
        Self { d_s, d_e, state }
    }

    pub fn product(rho_s: &DensityMatrix, rho_e: &DensityMatrix) -> Result<Self> {
        Self::new(rho_s.dim(), rho_e.dim(), rho_s.kron(rho_e))
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.d_e
    }

    pub fn state(&self) -> &DensityMatrix {
        &self.state
    }

    pub fn dim(&self) -> usize {
        self.d_s * self.d_e
    }

    pub fn system(&self) -> DensityMatrix {
        partial_trace(self, Subsystem::System)
    }

    pub fn environment(&self) -> DensityMatrix {
        partial_trace(self, Subsystem::Environment)
    }

    /// `U rho U^dagger`.
    pub fn evolve(&self, u: &UnitaryMatrix) -> Result<Self> {
        check_same_dim(self.dim(), u.dim())?;
        Ok(Self { d_s: self.d_s, d_e: self.d_e, state: u.conjugate(&self.state) })
    }
}

/// Unitary matrix with `||U^dagger U - I||_max <= TOL_UNITARY`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix {
    m: CMatrix,
}

impl UnitaryMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidInput("unitary must be square and nonempty".into()));
        }
        let dev = unitarity_defect(&m);
        if dev.is_nan() || dev > TOL_UNITARY {
            return Err(Error::InvalidInput(format!("matrix is not unitary (defect {dev:e})")));
        }
        Ok(Self { m })
    }

    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// `self * other`, i.e. `other` acts first.
    pub fn then_after(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m }
    }

    /// `||U^dagger U - I||_max`.
    pub fn defect(&self) -> f64 {
        unitarity_defect(&self.m)
    }

    pub fn conjugate(&self, rho: &DensityMatrix) -> DensityMatrix {
        let m = &self.m * rho.as_matrix() * self.m.adjoint();
        DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(m))
    }
}

/// Ascending eigenvalues with matching orthonormal eigenvectors (columns).
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: UnitaryMatrix,
}

impl Eigen {
    /// `V diag(f(lambda)) V^dagger` for precomputed eigenpairs.
    pub fn reconstruct(&self, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
        let fvals: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        if let Some((l, fl)) = self.values.iter().zip(&fvals).find(|(_, fl)| !fl.is_finite()) {
            return Err(Error::DomainError(format!("function undefined at eigenvalue {l:e} (gave {fl})")));
        }
        Ok(self.reconstruct_from(&fvals))
    }

    pub(crate) fn reconstruct_from(&self, fvals: &[f64]) -> HermitianMatrix {
        let v = self.vectors.as_matrix();
        let mut scaled = v.clone();
        for (k, &fk) in fvals.iter().enumerate() {
            scaled.column_mut(k).scale_mut(fk);
        }
        HermitianMatrix::symmetrized(scaled * v.adjoint())
    }
}

/// Full Hermitian eigendecomposition with eigenvalues sorted ascending.
///
/// Non-finite entries cannot reach this point: [`HermitianMatrix::new`]
/// rejects them with `InvalidInput`.
pub fn eig_hermitian(a: &HermitianMatrix) -> Eigen {
    let se = SymmetricEigen::new(a.m.clone());
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));
    let values = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.dim(), a.dim(), |r, c| se.eigenvectors[(r, order[c])]);
    Eigen { values, vectors: UnitaryMatrix::new_unchecked(vectors) }
}

fn sorted_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// Spectral calculus `V diag(f(lambda)) V^dagger`.
///
/// Returns `DomainError` when `f` is not finite at some eigenvalue.
pub fn matrix_function(a: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    eig_hermitian(a).reconstruct(f)
}

/// Kronecker product with `(A (x) B)[i*d_B + k, j*d_B + l] = A[i,j] B[k,l]`.
pub fn tensor_product(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix { m: a.m.kronecker(&b.m) }
}

/// Reduced state of one factor.
pub fn partial_trace(rho: &BipartiteState, keep: Subsystem) -> DensityMatrix {
    let (ds, de) = (rho.d_s, rho.d_e);
    let m = rho.state.as_matrix();
    let reduced = match keep {
        Subsystem::System => CMatrix::from_fn(ds, ds, |i, j| (0..de).map(|k| m[(i * de + k, j * de + k)]).sum()),
        Subsystem::Environment => CMatrix::from_fn(de, de, |k, l| (0..ds).map(|i| m[(i * de + k, i * de + l)]).sum()),
    };
    DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(reduced))
}

/// Partial trace of an arbitrary bipartite operator, e.g. a perturbation.
pub fn partial_trace_operator(
    op: &HermitianMatrix,
    d_s: usize,
    d_e: usize,
    keep: Subsystem,
) -> Result<HermitianMatrix> {
    if op.dim() != d_s * d_e {
        return Err(Error::InvalidInput(format!("operator has dimension {} but d_S * d_E = {}", op.dim(), d_s * d_e)));
    }
    let state = BipartiteState::new_unchecked(d_s, d_e, DensityMatrix::new_unchecked(op.clone()));
    Ok(partial_trace(&state, keep).into_hermitian())
}

/// `||rho - sigma||_1 / 2`.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    let diff = rho.as_hermitian().sub(sigma.as_hermitian())?;
    Ok(0.5 * diff.trace_norm())
}

/// `exp(-i H dt)` through the eigendecomposition of `H`.
pub fn unitary_step(h: &HermitianMatrix, dt: f64) -> Result<UnitaryMatrix> {
    if !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be finite, got {dt}")));
    }
    Ok(unitary_from_eigen(&eig_hermitian(h), dt))
}

pub(crate) fn unitary_from_eigen(e: &Eigen, dt: f64) -> UnitaryMatrix {
    let v = e.vectors.as_matrix();
    let mut scaled = v.clone();
    for (k, &l) in e.values.iter().enumerate() {
        let phase = C64::from_polar(1.0, -l * dt);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    UnitaryMatrix::new_unchecked(scaled * v.adjoint())
}

pub(crate) fn trace_of_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn unitarity_defect(m: &CMatrix) -> f64 {
    let p = m.adjoint() * m;
    let id = CMatrix::identity(m.nrows(), m.nrows());
    max_abs(&(p - id))
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::InvalidInput(format!("dimension mismatch: {a} vs {b}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn herm(rows: &[&[C64]]) -> HermitianMatrix {
        let n = rows.len();
        HermitianMatrix::new(CMatrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    fn random_hermitian(seed: u64, n: usize) -> HermitianMatrix {
        // small LCG so this module's tests do not depend on the sampling module
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let g = CMatrix::from_fn(n, n, |_, _| c(next(), next()));
        HermitianMatrix::symmetrized(g)
    }

    #[test]
    fn eig_of_diagonal_is_sorted() {
        let a = HermitianMatrix::from_real_diagonal(&[2.0, 1.0]).unwrap();
        let e = a.eig();
        assert_eq!(e.values, vec![1.0, 2.0]);
        // eigenvector for 1 is the second basis vector
        assert!((e.vectors.as_matrix()[(1, 0)].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_of_zero() {
        let e = HermitianMatrix::zeros(3).eig();
        assert_eq!(e.values, vec![0.0; 3]);
    }

    #[test]
    fn eig_of_pauli_x() {
        // characteristic polynomial l^2 - 1 = 0
        let x = herm(&[&[c(0.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(0.0, 0.0)]]);
        let e = x.eig();
        assert!((e.values[0] + 1.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_reconstructs_random_matrices() {
        for seed in 0..50 {
            let n = 2 + (seed as usize % 7);
            let a = random_hermitian(seed, n);
            let e = a.eig();
            let back = e.reconstruct(|x| x).unwrap();
            let err = back.sub(&a).unwrap().max_abs();
            assert!(err <= 1e-10 * (1.0 + a.max_abs()), "seed {seed}: {err:e}");
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            assert!(e.vectors.defect() < 1e-12);
        }
    }

    #[test]
    fn non_finite_entries_rejected() {
        let m = CMatrix::from_element(2, 2, c(f64::NAN, 0.0));
        assert!(matches!(HermitianMatrix::new(m), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn small_asymmetry_is_symmetrized_large_is_rejected() {
        let m = CMatrix::from_fn(2, 2, |i, j| {
            if i < j {
                c(1.0 + 1e-14, 0.0)
            } else if i > j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let h = HermitianMatrix::new(m).unwrap();
        assert_eq!(h.as_matrix()[(0, 1)], h.as_matrix()[(1, 0)].conj());
        let bad = CMatrix::from_fn(2, 2, |i, j| {
            if i < j {
                c(1.0, 0.1)
            } else if i > j {
                c(1.0, 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(HermitianMatrix::new(bad).is_err());
    }

    #[test]
    fn matrix_function_examples() {
        let a = random_hermitian(7, 4);
        let id = matrix_function(&a, |x| x).unwrap();
        assert!(id.sub(&a).unwrap().max_abs() < 1e-12);

        let e0 = matrix_function(&HermitianMatrix::zeros(2), f64::exp).unwrap();
        assert!(e0.sub(&HermitianMatrix::identity(2)).unwrap().max_abs() < 1e-15);

        let d = HermitianMatrix::from_real_diagonal(&[2f64.ln(), 3f64.ln()]).unwrap();
        let ed = matrix_function(&d, f64::exp).unwrap();
        let want = HermitianMatrix::from_real_diagonal(&[2.0, 3.0]).unwrap();
        assert!(ed.sub(&want).unwrap().max_abs() < 1e-14);
    }

    #[test]
    fn matrix_function_domain_error() {
        let d = HermitianMatrix::from_real_diagonal(&[-1.0, 1.0]).unwrap();
        assert!(matches!(matrix_function(&d, f64::ln), Err(Error::DomainError(_))));
        let z = HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).unwrap();
        assert!(matches!(matrix_function(&z, f64::ln), Err(Error::DomainError(_))));
    }

    #[test]
    fn tensor_product_examples() {
        let i2 = HermitianMatrix::identity(2);
        assert_eq!(tensor_product(&i2, &i2), HermitianMatrix::identity(4));
        let p = HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).unwrap();
        assert_eq!(tensor_product(&p, &p), HermitianMatrix::from_real_diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap());

        let a = random_hermitian(1, 3);
        let b = random_hermitian(2, 2);
        let ab = tensor_product(&a, &b);
        // index-sum oracle
        let mut tr = 0.0;
        for i in 0..3 {
            for k in 0..2 {
                tr += (a.as_matrix()[(i, i)] * b.as_matrix()[(k, k)]).re;
            }
        }
        assert!((ab.trace() - tr).abs() < 1e-13);
        assert!((ab.trace() - a.trace() * b.trace()).abs() < 1e-13);
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    for l in 0..2 {
                        let want = a.as_matrix()[(i, j)] * b.as_matrix()[(k, l)];
                        assert_eq!(ab.as_matrix()[(i * 2 + k, j * 2 + l)], want);
                    }
                }
            }
        }
    }

    fn bell() -> BipartiteState {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        BipartiteState::new(2, 2, DensityMatrix::pure(&psi).unwrap()).unwrap()
    }

    #[test]
    fn partial_trace_of_product_state() {
        let rs = DensityMatrix::from_matrix(CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(0.7, 0.0),
            (1, 1) => c(0.3, 0.0),
            (0, 1) => c(0.1, 0.2),
            _ => c(0.1, -0.2),
        }))
        .unwrap();
        let re = DensityMatrix::maximally_mixed(3);
        let joint = BipartiteState::product(&rs, &re).unwrap();
        let back = joint.system();
        assert!(back.as_hermitian().sub(rs.as_hermitian()).unwrap().max_abs() <= 1e-12);
        let back_e = joint.environment();
        assert!(back_e.as_hermitian().sub(re.as_hermitian()).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let half = DensityMatrix::maximally_mixed(2);
        let b = bell();
        for keep in [Subsystem::System, Subsystem::Environment] {
            let r = partial_trace(&b, keep);
            assert!(r.as_hermitian().sub(half.as_hermitian()).unwrap().max_abs() <= 1e-15);
            assert!((r.as_hermitian().trace() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn bipartite_dimension_checks() {
        let r = DensityMatrix::maximally_mixed(4);
        assert!(BipartiteState::new(2, 2, r.clone()).is_ok());
        assert!(BipartiteState::new(1, 3, r.clone()).is_err());
        assert!(BipartiteState::new(4, 1, r).is_err());
    }

    #[test]
    fn density_validation() {
        let not_unit = HermitianMatrix::from_real_diagonal(&[0.5, 0.4]).unwrap();
        assert!(matches!(DensityMatrix::new(not_unit), Err(Error::InvalidState(_))));
        let negative = HermitianMatrix::from_real_diagonal(&[1.1, -0.1]).unwrap();
        assert!(matches!(DensityMatrix::new(negative), Err(Error::InvalidState(_))));
    }

    #[test]
    fn trace_distance_examples() {
        let r = DensityMatrix::maximally_mixed(3);
        assert!(trace_distance(&r, &r).unwrap().abs() < 1e-15);
        let up = DensityMatrix::from_matrix(HermitianMatrix::from_real_diagonal(&[1.0, 0.0]).unwrap().into_matrix())
            .unwrap();
        let down = DensityMatrix::from_matrix(HermitianMatrix::from_real_diagonal(&[0.0, 1.0]).unwrap().into_matrix())
            .unwrap();
        assert!((trace_distance(&up, &down).unwrap() - 1.0).abs() < 1e-15);
        assert!(trace_distance(&up, &r).is_err());
    }

    #[test]
    fn trace_distance_qubit_off_diagonal() {
        // rho - gamma = [[0, a/2], [a*/2, 0]] has eigenvalues +-|a|/2
        let a = c(0.3, -0.4);
        let rho = DensityMatrix::from_matrix(CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c(0.6, 0.0),
            (1, 1) => c(0.4, 0.0),
            (0, 1) => a * 0.5,
            _ => a.conj() * 0.5,
        }))
        .unwrap();
        let gamma = DensityMatrix::from_matrix(HermitianMatrix::from_real_diagonal(&[0.6, 0.4]).unwrap().into_matrix())
            .unwrap();
        let t = trace_distance(&rho, &gamma).unwrap();
        assert!((t - a.norm() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn unitary_step_examples() {
        let h = random_hermitian(3, 4);
        let u0 = unitary_step(&h, 0.0).unwrap();
        assert!(u0.defect() < 1e-14);
        let id = CMatrix::identity(4, 4);
        assert!(max_abs(&(u0.as_matrix() - &id)) < 1e-14);

        let hp = HermitianMatrix::from_real_diagonal(&[0.0, std::f64::consts::PI]).unwrap();
        let u = unitary_step(&hp, 1.0).unwrap();
        let want = CMatrix::from_fn(2, 2, |i, j| {
            if i != j {
                c(0.0, 0.0)
            } else if i == 0 {
                c(1.0, 0.0)
            } else {
                c(-1.0, 0.0)
            }
        });
        assert!(max_abs(&(u.as_matrix() - want)) < 1e-15);

        assert!(unitary_step(&h, f64::NAN).is_err());
    }

    #[test]
    fn unitary_step_taylor() {
        let h = random_hermitian(11, 3);
        for dt in [1e-3, 1e-4] {
            let u = unitary_step(&h, dt).unwrap();
            let first = CMatrix::identity(3, 3) - h.as_matrix().map(|z| z * c(0.0, dt));
            let err = max_abs(&(u.as_matrix() - first));
            let bound = dt * dt * h.max_abs().powi(2) * 3.0 * 3.0;
            assert!(err <= bound, "dt {dt}: {err:e} > {bound:e}");
        }
    }

    #[test]
    fn unitary_json_roundtrip_for_matrices() {
        let a = random_hermitian(5, 3);
        let s = serde_json::to_string(&a).unwrap();
        let back: HermitianMatrix = serde_json::from_str(&s).unwrap();
        assert!(back.sub(&a).unwrap().max_abs() == 0.0);
        let missing_im: HermitianMatrix = serde_json::from_str(r#"{"dim":2,"re":[[1,0],[0,2]]}"#).unwrap();
        assert_eq!(missing_im, HermitianMatrix::from_real_diagonal(&[1.0, 2.0]).unwrap());
        assert!(serde_json::from_str::<HermitianMatrix>(r#"{"dim":3,"re":[[1,0],[0,2]]}"#).is_err());
    }
}
