//! Seeded random ensembles: Haar unitaries, Wishart density matrices,
//! GUE-like Hamiltonians.

use nalgebra::QR;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{CMatrix, DensityMatrix, HermitianMatrix, UnitaryMatrix, C64};

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent generator number `stream` under one seed; sweeps use one
/// stream per member so results do not depend on execution order.
pub fn seeded_stream(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Haar-distributed unitary: QR of a Ginibre matrix with the phases of
/// `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> UnitaryMatrix {
    let qr = QR::new(ginibre(rng, dim, dim));
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q.column_mut(k).iter_mut().for_each(|z| *z *= phase);
    }
    UnitaryMatrix::new_unchecked(q)
}

/// Full-rank Wishart state `G G^dagger / tr`.
pub fn wishart_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    wishart_density_rank(rng, dim, dim)
}

/// Wishart state of rank at most `rank`.
pub fn wishart_density_rank<R: Rng + ?Sized>(rng: &mut R, dim: usize, rank: usize) -> DensityMatrix {
    let g = ginibre(rng, dim, rank.max(1));
    let w = &g * g.adjoint();
    let tr: f64 = w.diagonal().iter().map(|z| z.re).sum();
    DensityMatrix::new_unchecked(HermitianMatrix::symmetrized(w.unscale(tr)))
}

/// `(G + G^dagger) / 2` with Ginibre `G`, scaled by `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> HermitianMatrix {
    HermitianMatrix::symmetrized(ginibre(rng, dim, dim).scale(scale))
}

/// Haar-rotated Hamiltonian with levels drawn uniformly from `[0, width]`,
/// the extreme levels pinned to `0` and `width`.
pub fn random_env_hamiltonian<R: Rng + ?Sized>(rng: &mut R, dim: usize, width: f64) -> HermitianMatrix {
    let mut levels: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() * width).collect();
    levels[0] = 0.0;
    if dim > 1 {
        levels[dim - 1] = width;
    }
    let u = haar_unitary(rng, dim);
    let d = CMatrix::from_fn(dim, dim, |i, j| if i == j { C64::new(levels[i], 0.0) } else { C64::new(0.0, 0.0) });
    let m = u.as_matrix() * d * u.as_matrix().adjoint();
    HermitianMatrix::symmetrized(m)
}
