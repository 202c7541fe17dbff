//! Reference implementations used as test oracles.
//!
//! A complex Hermitian `A + iB` is handled through its real symmetric
//! embedding `[[A, -B], [B, A]]`, which doubles every eigenvalue and commutes
//! with real spectral functions. None of this goes through the library's
//! own spectral code.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CM = DMatrix<Complex64>;

fn embed(m: &CM) -> DMatrix<f64> {
    let n = m.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            r[(i, j)] = z.re;
            r[(i + n, j + n)] = z.re;
            r[(i, j + n)] = -z.im;
            r[(i + n, j)] = z.im;
        }
    }
    r
}

fn unembed(r: &DMatrix<f64>) -> CM {
    let n = r.nrows() / 2;
    CM::from_fn(n, n, |i, j| Complex64::new(r[(i, j)], r[(i + n, j)]))
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn eigvals(m: &CM) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(embed(m)).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v.into_iter().step_by(2).collect()
}

/// `f(M)` for Hermitian `M`.
pub fn matfun(m: &CM, f: impl Fn(f64) -> f64) -> CM {
    let e = SymmetricEigen::new(embed(m));
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(f));
    unembed(&(&e.eigenvectors * d * e.eigenvectors.transpose()))
}

fn xlogx(x: f64) -> f64 {
    if x > 1e-300 {
        x * x.ln()
    } else {
        0.0
    }
}

pub fn entropy(rho: &CM) -> f64 {
    -eigvals(rho).into_iter().map(|x| xlogx(x.max(0.0))).sum::<f64>()
}

/// `D(rho || sigma)`, `+inf` on a support mismatch.
pub fn rel_entropy(rho: &CM, sigma: &CM) -> f64 {
    let r = embed(rho);
    let e = SymmetricEigen::new(embed(sigma));
    let mut cross = 0.0;
    for k in 0..e.eigenvalues.len() {
        let w = e.eigenvectors.column(k);
        let weight = (w.transpose() * &r * w)[(0, 0)];
        let mu = e.eigenvalues[k];
        if mu > 1e-300 {
            cross += weight * mu.ln();
        } else if weight > 1e-14 {
            return f64::INFINITY;
        }
    }
    -entropy(rho) - 0.5 * cross
}

pub fn trace_distance(a: &CM, b: &CM) -> f64 {
    0.5 * eigvals(&(a - b)).into_iter().map(f64::abs).sum::<f64>()
}

pub fn kron(a: &CM, b: &CM) -> CM {
    let (n, m) = (a.nrows(), b.nrows());
    CM::from_fn(n * m, n * m, |i, j| a[(i / m, j / m)] * b[(i % m, j % m)])
}

pub fn trace_env(rho: &CM, ds: usize, de: usize) -> CM {
    CM::from_fn(ds, ds, |i, j| (0..de).map(|k| rho[(i * de + k, j * de + k)]).sum())
}

pub fn trace_sys(rho: &CM, ds: usize, de: usize) -> CM {
    CM::from_fn(de, de, |i, j| (0..ds).map(|k| rho[(k * de + i, k * de + j)]).sum())
}

pub fn mutual_information(rho: &CM, ds: usize, de: usize) -> f64 {
    entropy(&trace_env(rho, ds, de)) + entropy(&trace_sys(rho, ds, de)) - entropy(rho)
}

pub fn expect(rho: &CM, h: &CM) -> f64 {
    (rho * h).trace().re
}

pub fn gibbs(h: &CM, beta: f64) -> CM {
    let ev = eigvals(h);
    let shift = if beta >= 0.0 { ev[0] } else { ev[ev.len() - 1] };
    let g = matfun(h, |x| (-beta * (x - shift)).exp());
    let z = g.trace().re;
    g / Complex64::new(z, 0.0)
}

fn populations(levels: &[f64], beta: f64) -> Vec<f64> {
    let logs: Vec<f64> = levels.iter().map(|e| -beta * e).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

pub fn gibbs_energy(h: &CM, beta: f64) -> f64 {
    let ev = eigvals(h);
    populations(&ev, beta).iter().zip(&ev).map(|(p, e)| p * e).sum()
}

pub fn gibbs_variance(h: &CM, beta: f64) -> f64 {
    let ev = eigvals(h);
    let p = populations(&ev, beta);
    let mean: f64 = p.iter().zip(&ev).map(|(p, e)| p * e).sum();
    p.iter().zip(&ev).map(|(p, e)| p * (e - mean) * (e - mean)).sum()
}

/// `D(gamma(a) || gamma(b))` from the populations.
pub fn gibbs_divergence(h: &CM, a: f64, b: f64) -> f64 {
    let ev = eigvals(h);
    let (p, q) = (populations(&ev, a), populations(&ev, b));
    p.iter().zip(&q).filter(|(x, _)| **x > 0.0).map(|(x, y)| x * (x.ln() - y.ln())).sum()
}

/// Energy-matching temperature by plain bisection.
pub fn effective_beta(rho_e: &CM, h: &CM) -> f64 {
    let target = expect(rho_e, h);
    let (mut lo, mut hi) = (-200.0_f64, 200.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gibbs_energy(h, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn binary_entropy(p: f64) -> f64 {
    -xlogx(p) - xlogx(1.0 - p)
}

/// `exp(-i H t)` for a real symmetric `H`.
pub fn real_propagator(h: &CM, t: f64) -> CM {
    assert!(h.iter().all(|z| z.im == 0.0), "propagator oracle needs a real Hamiltonian");
    let e = SymmetricEigen::new(h.map(|z| z.re));
    let v = e.eigenvectors.map(|x| Complex64::new(x, 0.0));
    let d = CM::from_diagonal(&e.eigenvalues.map(|l| Complex64::from_polar(1.0, -l * t)));
    &v * d * v.adjoint()
}

pub fn max_abs_diff(a: &CM, b: &CM) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}
