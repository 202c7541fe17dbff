//! Entropic and thermal state functions.
//!
//! Gibbs states are always formed in the eigenbasis of the environment
//! Hamiltonian with the dominant Boltzmann weight factored out, so `exp`
//! never overflows for large `|beta|`. Energies near a spectral edge are
//! measured from that edge, which keeps the effective inverse temperature
//! well resolved for nearly pure environment states.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{BipartiteState, DensityMatrix, Eigen, HermitianMatrix};

/// Eigenvalues of a density matrix below this are treated as exact zeros in `S`.
pub const ENTROPY_ZERO_TOL: f64 = 1e-14;

const DEFAULT_SUPPORT_TOL: f64 = 1e-12;
static SUPPORT_TOL_BITS: AtomicU64 = AtomicU64::new(DEFAULT_SUPPORT_TOL.to_bits());

/// Eigenvalue threshold deciding supports in relative entropies.
pub fn support_tolerance() -> f64 {
    f64::from_bits(SUPPORT_TOL_BITS.load(Ordering::Relaxed))
}

/// Overrides the process-wide support tolerance.
pub fn set_support_tolerance(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidInput(format!("support tolerance must lie in (0, 1), got {tol}")));
    }
    SUPPORT_TOL_BITS.store(tol.to_bits(), Ordering::Relaxed);
    Ok(())
}

/// A real number or one of the two infinities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    /// Lossy conversion; infinities map to the IEEE infinities.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_nan() {
            Err(Error::InvalidInput("NaN is not an extended real".into()))
        } else if x == f64::INFINITY {
            Ok(ExtReal::PosInf)
        } else if x == f64::NEG_INFINITY {
            Ok(ExtReal::NegInf)
        } else {
            Ok(ExtReal::Finite(x))
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x).expect("NaN passed as extended real")
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(x) => s.serialize_f64(*x),
            ExtReal::PosInf => s.serialize_str("inf"),
            ExtReal::NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(ExtReal::Finite(x)),
            Raw::Text(t) => match t.as_str() {
                "inf" | "+inf" | "Infinity" => Ok(ExtReal::PosInf),
                "-inf" | "-Infinity" => Ok(ExtReal::NegInf),
                other => Err(serde::de::Error::custom(format!("invalid extended real {other:?}"))),
            },
        }
    }
}

/// Entropy of a probability vector, clipping to `[0, 1]` and dropping
/// entries below [`ENTROPY_ZERO_TOL`].
pub fn entropy_of_spectrum(p: &[f64]) -> f64 {
    p.iter().map(|&l| l.clamp(0.0, 1.0)).filter(|&l| l > ENTROPY_ZERO_TOL).map(|l| -l * l.ln()).sum()
}

/// `S(rho) = -tr[rho ln rho]`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    entropy_of_spectrum(&rho.spectrum())
}

/// `D(rho || sigma) = tr[rho (ln rho - ln sigma)]`, `+inf` when the support
/// of `rho` is not contained in that of `sigma`.
///
/// The result is not clamped at zero; rounding can leave it slightly negative.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<ExtReal> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidInput(format!("dimension mismatch: {} vs {}", rho.dim(), sigma.dim())));
    }
    let tol = support_tolerance();
    let neg_entropy = -von_neumann_entropy(rho);
    let es = sigma.as_hermitian().eig();
    let cross = cross_term(rho, &es, tol);
    Ok(match cross {
        Some(c) => ExtReal::Finite(neg_entropy - c),
        None => ExtReal::PosInf,
    })
}

/// `tr[rho ln sigma]` from the eigenpairs of `sigma`; `None` on support violation.
fn cross_term(rho: &DensityMatrix, sigma: &Eigen, tol: f64) -> Option<f64> {
    let v = sigma.vectors.as_matrix();
    let r = rho.as_matrix();
    let mut acc = 0.0;
    for (k, &mu) in sigma.values.iter().enumerate() {
        let col = v.column(k);
        let weight = (col.adjoint() * r * col)[(0, 0)].re;
        if mu > tol {
            acc += weight * mu.ln();
        } else if weight > tol {
            return None;
        }
    }
    Some(acc)
}

/// `I = S(rho_S) + S(rho_E) - S(rho_SE)`.
pub fn mutual_information(rho: &BipartiteState) -> f64 {
    von_neumann_entropy(&rho.system()) + von_neumann_entropy(&rho.environment()) - von_neumann_entropy(rho.state())
}

/// Environment Hamiltonian with its spectrum cached.
///
/// Requires at least two distinct eigenvalues; degenerate levels are allowed.
#[derive(Clone, Debug)]
pub struct EnvHamiltonian {
    h: HermitianMatrix,
    eig: Eigen,
    degeneracy_tol: f64,
}

impl EnvHamiltonian {
    pub fn new(h: HermitianMatrix) -> Result<Self> {
        let eig = h.eig();
        let (lo, hi) = (eig.values[0], *eig.values.last().unwrap());
        let degeneracy_tol = 1e-12 * lo.abs().max(hi.abs()).max(1.0);
        if hi - lo <= degeneracy_tol {
            return Err(Error::InvalidInput("environment Hamiltonian needs at least two distinct eigenvalues".into()));
        }
        Ok(Self { h, eig, degeneracy_tol })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn levels(&self) -> &[f64] {
        &self.eig.values
    }

    pub fn eigen(&self) -> &Eigen {
        &self.eig
    }

    pub fn min_energy(&self) -> f64 {
        self.eig.values[0]
    }

    pub fn max_energy(&self) -> f64 {
        *self.eig.values.last().unwrap()
    }

    /// `ln p_i` of the Gibbs populations in the energy eigenbasis.
    pub fn log_populations(&self, beta: ExtReal) -> Vec<f64> {
        let e = &self.eig.values;
        match beta {
            ExtReal::Finite(b) => {
                let reference = if b >= 0.0 { self.min_energy() } else { self.max_energy() };
                let expo: Vec<f64> = e.iter().map(|&x| -b * (x - reference)).collect();
                let log_norm = expo.iter().map(|&x| x.exp()).sum::<f64>().ln();
                expo.into_iter().map(|x| x - log_norm).collect()
            }
            ExtReal::PosInf | ExtReal::NegInf => {
                let edge = if beta == ExtReal::PosInf { self.min_energy() } else { self.max_energy() };
                let inside: Vec<bool> = e.iter().map(|&x| (x - edge).abs() <= self.degeneracy_tol).collect();
                let ln_count = (inside.iter().filter(|&&b| b).count() as f64).ln();
                inside.into_iter().map(|b| if b { -ln_count } else { f64::NEG_INFINITY }).collect()
            }
        }
    }

    pub fn populations(&self, beta: ExtReal) -> Vec<f64> {
        self.log_populations(beta).into_iter().map(f64::exp).collect()
    }

    /// `gamma_E(beta) = exp(-beta H_E) / Z(beta)`.
    pub fn gibbs_state(&self, beta: ExtReal) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.eig.reconstruct_from(&self.populations(beta)))
    }

    /// `ln Z(beta)`, finite `beta` only.
    pub fn log_partition(&self, beta: f64) -> f64 {
        let reference = if beta >= 0.0 { self.min_energy() } else { self.max_energy() };
        let s: f64 = self.eig.values.iter().map(|&x| (-beta * (x - reference)).exp()).sum();
        -beta * reference + s.ln()
    }

    /// Gibbs energy measured upward from the ground level.
    fn energy_above_ground(&self, beta: ExtReal) -> f64 {
        let e0 = self.min_energy();
        self.populations(beta).iter().zip(&self.eig.values).map(|(p, e)| p * (e - e0)).sum()
    }

    /// Gibbs energy measured downward from the top level.
    fn energy_below_top(&self, beta: ExtReal) -> f64 {
        let e1 = self.max_energy();
        self.populations(beta).iter().zip(&self.eig.values).map(|(p, e)| p * (e1 - e)).sum()
    }

    /// `tr[gamma_E(beta) H_E]`.
    pub fn energy(&self, beta: ExtReal) -> f64 {
        self.populations(beta).iter().zip(&self.eig.values).map(|(p, e)| p * e).sum()
    }

    /// `Var_gamma[H_E]`, the negated slope of [`Self::energy`].
    pub fn variance(&self, beta: ExtReal) -> f64 {
        let p = self.populations(beta);
        let mean = self.energy(beta);
        p.iter().zip(&self.eig.values).map(|(p, e)| p * (e - mean).powi(2)).sum()
    }

    /// `S(gamma_E(beta))`.
    pub fn gibbs_entropy(&self, beta: ExtReal) -> f64 {
        self.log_populations(beta).into_iter().filter(|lp| lp.is_finite()).map(|lp| -lp.exp() * lp).sum()
    }

    /// `D(gamma_E(a) || gamma_E(b))`; both states commute, so this is a
    /// classical divergence of the populations.
    pub fn gibbs_divergence(&self, a: ExtReal, b: ExtReal) -> ExtReal {
        let la = self.log_populations(a);
        let lb = self.log_populations(b);
        let mut acc = 0.0;
        for (x, y) in la.into_iter().zip(lb) {
            if x == f64::NEG_INFINITY {
                continue;
            }
            if y == f64::NEG_INFINITY {
                return ExtReal::PosInf;
            }
            acc += x.exp() * (x - y);
        }
        ExtReal::Finite(acc)
    }

    /// Diagonal of `rho_E` in the energy eigenbasis.
    pub fn level_occupations(&self, rho_e: &DensityMatrix) -> Result<Vec<f64>> {
        if rho_e.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "environment state has dimension {} but H_E has {}",
                rho_e.dim(),
                self.dim()
            )));
        }
        let v = self.eig.vectors.as_matrix();
        let r = rho_e.as_matrix();
        Ok((0..self.dim())
            .map(|k| {
                let col = v.column(k);
                (col.adjoint() * r * col)[(0, 0)].re
            })
            .collect())
    }

    /// Unique `beta*` with `tr[rho_E H_E] = tr[gamma_E(beta*) H_E]`.
    pub fn effective_beta(&self, rho_e: &DensityMatrix, cfg: &BetaSolveConfig) -> Result<ExtReal> {
        let q = self.level_occupations(rho_e)?;
        self.effective_beta_from_occupations(&q, cfg)
    }

    pub(crate) fn effective_beta_from_occupations(&self, q: &[f64], cfg: &BetaSolveConfig) -> Result<ExtReal> {
        let (e0, e1) = (self.min_energy(), self.max_energy());
        let above: f64 = q.iter().zip(&self.eig.values).map(|(p, e)| p * (e - e0)).sum();
        let below: f64 = q.iter().zip(&self.eig.values).map(|(p, e)| p * (e1 - e)).sum();
        let tol = cfg.abs_tol;
        if above < -tol || below < -tol {
            return Err(Error::InfeasibleEnergy { energy: e0 + above, min: e0, max: e1 });
        }
        if above <= tol {
            return Ok(ExtReal::PosInf);
        }
        if below <= tol {
            return Ok(ExtReal::NegInf);
        }
        // Gibbs energy minus target, strictly decreasing in beta.
        let from_top = below < above;
        let residual = |b: f64| {
            if from_top {
                below - self.energy_below_top(ExtReal::Finite(b))
            } else {
                self.energy_above_ground(ExtReal::Finite(b)) - above
            }
        };

        let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
        while residual(lo) < 0.0 {
            hi = lo;
            lo *= 2.0;
            if lo < -cfg.beta_clamp {
                return Ok(ExtReal::NegInf);
            }
        }
        while residual(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if hi > cfg.beta_clamp {
                return Ok(ExtReal::PosInf);
            }
        }

        let mut beta = 0.5 * (lo + hi);
        let mut best = (f64::INFINITY, beta);
        let mut polish = 0;
        for _ in 0..cfg.max_iter {
            let f = residual(beta);
            if f.abs() < best.0 {
                best = (f.abs(), beta);
            }
            if f == 0.0 {
                return Ok(ExtReal::Finite(beta));
            }
            if f > 0.0 {
                lo = beta;
            } else {
                hi = beta;
            }
            let var = self.variance(ExtReal::Finite(beta));
            let newton = beta + f / var;
            let next = if var > 0.0 && newton >= lo && newton <= hi { newton } else { 0.5 * (lo + hi) };
            let tiny = 1e-15 * beta.abs().max(1.0);
            if f.abs() <= tol {
                polish += 1;
                if polish > 3 || (next - beta).abs() <= tiny {
                    return Ok(ExtReal::Finite(best.1));
                }
            } else if (next - beta).abs() <= tiny || hi - lo <= tiny {
                break;
            }
            beta = next;
        }
        if best.0 <= tol {
            return Ok(ExtReal::Finite(best.1));
        }
        Err(Error::ConvergenceError { iterations: cfg.max_iter, residual: best.0 })
    }
}

/// Inverse temperature paired with the fixed environment Hamiltonian.
#[derive(Clone, Debug)]
pub struct GibbsSpec {
    pub beta: ExtReal,
    pub env: EnvHamiltonian,
}

impl GibbsSpec {
    pub fn new(beta: ExtReal, h_env: HermitianMatrix) -> Result<Self> {
        Ok(Self { beta, env: EnvHamiltonian::new(h_env)? })
    }
}

pub fn gibbs_state(spec: &GibbsSpec) -> DensityMatrix {
    spec.env.gibbs_state(spec.beta)
}

pub fn gibbs_energy(spec: &GibbsSpec) -> f64 {
    spec.env.energy(spec.beta)
}

pub fn gibbs_variance(spec: &GibbsSpec) -> f64 {
    spec.env.variance(spec.beta)
}

/// Settings for the `beta*` root finder.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaSolveConfig {
    /// Accepted absolute energy residual.
    pub abs_tol: f64,
    pub max_iter: usize,
    /// `|beta|` beyond which an infinite temperature is reported.
    pub beta_clamp: f64,
}

impl BetaSolveConfig {
    pub fn new(abs_tol: f64, max_iter: usize, beta_clamp: f64) -> Result<Self> {
        if abs_tol.is_nan() || abs_tol <= 0.0 || max_iter == 0 || beta_clamp.is_nan() || beta_clamp <= 0.0 {
            return Err(Error::InvalidInput("abs_tol and beta_clamp must be positive and max_iter at least 1".into()));
        }
        Ok(Self { abs_tol, max_iter, beta_clamp })
    }
}

impl Default for BetaSolveConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-12, max_iter: 200, beta_clamp: 1e6 }
    }
}

/// Solves `tr[rho_E H_E] = tr[gamma_E(beta*) H_E]` for `beta*`.
pub fn effective_beta(rho_e: &DensityMatrix, h_env: &HermitianMatrix, cfg: &BetaSolveConfig) -> Result<ExtReal> {
    EnvHamiltonian::new(h_env.clone())?.effective_beta(rho_e, cfg)
}
