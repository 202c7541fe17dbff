//! Two-level environment with `H_E = diag(0, eps)`, ground state first.
//!
//! An environment state is written in Bloch form
//! `rho_E = [[1 + p, a], [conj(a), 1 - p]] / 2`, and the Gibbs state has
//! `p = r(beta) = tanh(beta eps / 2)` and no coherence. Everything here
//! depends on the coherence only through its modulus.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::binary_entropy;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, DensityMatrix, HermitianMatrix, C64};
use crate::thermo::{EnvHamiltonian, ExtReal};

const BALL_TOL: f64 = 1e-12;

/// Population asymmetry of the Gibbs state, `tanh(beta eps / 2)`.
pub fn r_of_beta(beta: f64, epsilon: f64) -> f64 {
    (0.5 * beta * epsilon).tanh()
}

fn r_ext(beta: ExtReal, epsilon: f64) -> f64 {
    match beta {
        ExtReal::NegInf => -1.0,
        ExtReal::PosInf => 1.0,
        ExtReal::Finite(b) => r_of_beta(b, epsilon),
    }
}

/// Inverse of [`r_of_beta`]; `r = +-1` maps to `+-inf`.
pub fn beta_of_r(r: f64, epsilon: f64) -> ExtReal {
    if r >= 1.0 {
        ExtReal::PosInf
    } else if r <= -1.0 {
        ExtReal::NegInf
    } else {
        ExtReal::Finite(2.0 * r.atanh() / epsilon)
    }
}

/// A point of the Bloch ball in the energy eigenbasis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvPoint {
    pub longitudinal: f64,
    pub coherence: C64,
}

impl EnvPoint {
    pub fn new(longitudinal: f64, coherence: C64) -> Result<Self> {
        if !longitudinal.is_finite() || !coherence.re.is_finite() || !coherence.im.is_finite() {
            return Err(Error::InvalidInput("environment point has non-finite coordinates".into()));
        }
        let norm2 = longitudinal * longitudinal + coherence.norm_sqr();
        if norm2 > 1.0 + BALL_TOL {
            return Err(Error::InvalidState(format!("point lies outside the Bloch ball (|r|^2 = {norm2})")));
        }
        Ok(EnvPoint { longitudinal, coherence })
    }

    /// Reads `(p, a)` off a two-level density matrix.
    pub fn from_density(rho: &DensityMatrix) -> Result<Self> {
        if rho.dim() != 2 {
            return Err(Error::InvalidInput(format!("expected a qubit state, got dimension {}", rho.dim())));
        }
        let m = rho.as_matrix();
        EnvPoint::new(m[(0, 0)].re - m[(1, 1)].re, m[(0, 1)] * 2.0)
    }

    pub fn to_density(&self) -> DensityMatrix {
        let (p, a) = (self.longitudinal, self.coherence);
        let m = CMatrix::from_row_slice(2, 2, &[C64::new(1.0 + p, 0.0), a, a.conj(), C64::new(1.0 - p, 0.0)])
            * C64::new(0.5, 0.0);
        DensityMatrix::from_matrix(m).expect("Bloch-ball points are states")
    }

    pub fn coherence_abs(&self) -> f64 {
        self.coherence.norm()
    }

    /// Energy-matching inverse temperature, `r(beta*) = p`.
    pub fn beta_star(&self, epsilon: f64) -> ExtReal {
        beta_of_r(self.longitudinal, epsilon)
    }
}

/// `H_E = diag(0, eps)`.
pub fn qubit_env(epsilon: f64) -> Result<EnvHamiltonian> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidInput(format!("gap must be positive and finite, got {epsilon}")));
    }
    EnvHamiltonian::new(HermitianMatrix::from_real_diagonal(&[0.0, epsilon])?)
}

/// `(delta_T, T(sigma_E, gamma(beta_tau)))` in closed form:
/// `|a| / 2` and `sqrt((s - r(beta_tau))^2 + |b|^2) / 2`.
pub fn example_distances(initial: &EnvPoint, fin: &EnvPoint, beta_tau: f64, epsilon: f64) -> (f64, f64) {
    let dr = fin.longitudinal - r_of_beta(beta_tau, epsilon);
    (0.5 * initial.coherence_abs(), 0.5 * (dr * dr + fin.coherence.norm_sqr()).sqrt())
}

/// `D(gamma(beta*_0) || gamma(beta0))` for the two-level Gibbs family.
fn gamma_divergence(beta_star: ExtReal, beta0: ExtReal, epsilon: f64) -> f64 {
    let h = |r: f64| [(0.5 * (1.0 + r)), (0.5 * (1.0 - r))];
    if beta_star == beta0 {
        return 0.0;
    }
    // log-populations straight from beta, so saturated tanh does not lose them
    let log_pop = |b: ExtReal| -> [f64; 2] {
        match b {
            ExtReal::Finite(b) => {
                let x = b * epsilon;
                let lz = if x >= 0.0 { (-x).exp().ln_1p() } else { -x + x.exp().ln_1p() };
                [-lz, -x - lz]
            }
            ExtReal::PosInf => [0.0, f64::NEG_INFINITY],
            ExtReal::NegInf => [f64::NEG_INFINITY, 0.0],
        }
    };
    let p = h(r_ext(beta_star, epsilon));
    let (lp, lq) = (log_pop(beta_star), log_pop(beta0));
    (0..2).filter(|&k| p[k] > 0.0).map(|k| p[k] * (lp[k] - lq[k])).sum::<f64>().max(0.0)
}

fn coherence_penalty(initial: &EnvPoint) -> f64 {
    // |a| <= 1 inside the ball, so the argument stays in [0, 1/2]
    2.0 * binary_entropy((0.5 * initial.coherence_abs()).min(1.0)).unwrap_or(0.0)
}

/// Right-hand side `2 H2(|a| / 2) + 2 D_gamma(beta0)`.
fn region_rhs(initial: &EnvPoint, beta0: ExtReal, epsilon: f64) -> f64 {
    coherence_penalty(initial) + 2.0 * gamma_divergence(initial.beta_star(epsilon), beta0, epsilon)
}

/// `(s - r(beta_tau))^2 + |b|^2 >= 2 H2(|a| / 2) + 2 D_gamma(beta0)`.
pub fn region_condition(initial: &EnvPoint, fin: &EnvPoint, beta0: f64, beta_tau: f64, epsilon: f64) -> bool {
    let dr = fin.longitudinal - r_of_beta(beta_tau, epsilon);
    dr * dr + fin.coherence.norm_sqr() >= region_rhs(initial, ExtReal::Finite(beta0), epsilon)
}

/// The condition with `beta_t = beta*_t` at both ends: `|b|^2 >= 2 H2(|a| / 2)`.
pub fn region_condition_energy_matching(initial: &EnvPoint, fin: &EnvPoint) -> bool {
    fin.coherence.norm_sqr() >= coherence_penalty(initial)
}

/// Final-time temperature used for a region map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionPolicy {
    Constant { beta: f64 },
    EnergyMatching,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    fn validate(&self, name: &str) -> Result<()> {
        if self.points == 0 {
            return Err(Error::InvalidInput(format!("axis {name} has zero resolution")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.min > self.max {
            return Err(Error::InvalidInput(format!("axis {name} has an invalid range [{}, {}]", self.min, self.max)));
        }
        if self.points > 1 && self.min == self.max {
            return Err(Error::InvalidInput(format!("axis {name} repeats one value {} times", self.points)));
        }
        Ok(())
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.points == 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * k as f64 / (self.points - 1) as f64
        }
    }

    pub fn step(&self) -> f64 {
        if self.points == 1 {
            0.0
        } else {
            (self.max - self.min) / (self.points - 1) as f64
        }
    }
}

fn default_spec_version() -> u32 {
    1
}

fn default_epsilon() -> f64 {
    1.0
}

/// A `(s, |b|)` grid of final environment states for a fixed initial state.
///
/// `beta0` defaults to the energy-matching value of the initial state and
/// is ignored by the energy-matching policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionGrid {
    #[serde(default = "default_spec_version")]
    pub spec_version: u32,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub beta0: Option<f64>,
    pub policy: RegionPolicy,
    /// Initial longitudinal coordinate `p`.
    pub p: f64,
    /// Initial coherence modulus `|a|`.
    pub a_abs: f64,
    pub s: Axis,
    pub b_abs: Axis,
}

impl RegionGrid {
    pub fn validate(&self) -> Result<()> {
        if self.spec_version != 1 {
            return Err(Error::InvalidInput(format!("unsupported spec_version {}", self.spec_version)));
        }
        qubit_env(self.epsilon)?;
        if let Some(b) = self.beta0 {
            if !b.is_finite() {
                return Err(Error::InvalidInput("beta0 must be finite".into()));
            }
        }
        if let RegionPolicy::Constant { beta } = self.policy {
            if !beta.is_finite() {
                return Err(Error::InvalidInput("constant beta must be finite".into()));
            }
        }
        if self.a_abs < 0.0 {
            return Err(Error::InvalidInput("a_abs must be non-negative".into()));
        }
        EnvPoint::new(self.p, C64::new(self.a_abs, 0.0))?;
        self.s.validate("s")?;
        self.b_abs.validate("b_abs")?;
        if self.b_abs.min < 0.0 {
            return Err(Error::InvalidInput("b_abs axis must be non-negative".into()));
        }
        Ok(())
    }

    pub fn initial(&self) -> EnvPoint {
        EnvPoint { longitudinal: self.p, coherence: C64::new(self.a_abs, 0.0) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RegionRow {
    pub s: f64,
    pub b_abs: f64,
    pub rhs: f64,
    pub holds: bool,
    pub feasible: bool,
}

/// Grid metadata written next to the region CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionMeta {
    pub spec_version: u32,
    pub epsilon: f64,
    pub policy: RegionPolicy,
    pub p: f64,
    pub a_abs: f64,
    pub beta0: ExtReal,
    pub beta_star_0: ExtReal,
    pub rhs: f64,
    /// `"ball"` for a constant final temperature, `"horizontal"` otherwise.
    pub boundary: &'static str,
    pub ball_center_s: Option<f64>,
    pub ball_radius: Option<f64>,
    /// `sqrt(rhs)`: the `|b|` level of the energy-matching boundary.
    pub b_threshold: Option<f64>,
    pub s: Axis,
    pub b_abs: Axis,
    pub cells: usize,
    pub feasible_cells: usize,
    pub true_cells: usize,
}

#[derive(Clone, Debug)]
pub struct RegionMap {
    pub meta: RegionMeta,
    pub rows: Vec<RegionRow>,
}

impl RegionMap {
    pub const CSV_HEADER: &'static str = "s,b_abs,rhs,holds,feasible";

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.s, r.b_abs, r.rhs, r.holds, r.feasible)?;
        }
        Ok(())
    }
}

/// Evaluates the sufficient condition on every cell, `s` outermost.
pub fn emit_region_map(grid: &RegionGrid) -> Result<RegionMap> {
    grid.validate()?;
    let eps = grid.epsilon;
    let initial = grid.initial();
    let beta_star_0 = initial.beta_star(eps);
    let (beta0, rhs, center) = match grid.policy {
        RegionPolicy::Constant { beta } => {
            let b0 = grid.beta0.map(ExtReal::Finite).unwrap_or(beta_star_0);
            (b0, region_rhs(&initial, b0, eps), Some(r_of_beta(beta, eps)))
        }
        RegionPolicy::EnergyMatching => (beta_star_0, region_rhs(&initial, beta_star_0, eps), None),
    };
    let rows: Vec<RegionRow> = (0..grid.s.points * grid.b_abs.points)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / grid.b_abs.points, idx % grid.b_abs.points);
            let (s, b) = (grid.s.value(i), grid.b_abs.value(j));
            let feasible = s * s + b * b <= 1.0 + BALL_TOL;
            let lhs = match center {
                Some(c) => (s - c) * (s - c) + b * b,
                None => b * b,
            };
            RegionRow { s, b_abs: b, rhs, holds: feasible && lhs >= rhs, feasible }
        })
        .collect();
    let meta = RegionMeta {
        spec_version: 1,
        epsilon: eps,
        policy: grid.policy,
        p: grid.p,
        a_abs: grid.a_abs,
        beta0,
        beta_star_0,
        rhs,
        boundary: if center.is_some() { "ball" } else { "horizontal" },
        ball_center_s: center,
        ball_radius: center.map(|_| rhs.sqrt()),
        b_threshold: if center.is_none() { Some(rhs.sqrt()) } else { None },
        s: grid.s,
        b_abs: grid.b_abs,
        cells: rows.len(),
        feasible_cells: rows.iter().filter(|r| r.feasible).count(),
        true_cells: rows.iter().filter(|r| r.holds).count(),
    };
    Ok(RegionMap { meta, rows })
}
