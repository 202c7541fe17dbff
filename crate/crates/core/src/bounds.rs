//! Lower bounds on entropy production and sufficient conditions for its
//! non-negativity.
//!
//! Both bounds estimate `-D(rho_SE || rho_S (x) gamma(beta*_0))`, the amount
//! by which an initial state away from `rho_S (x) gamma` can pull the
//! production below zero. The entropic bound is tight when the system is
//! pure; the trace-distance bound follows from a continuity estimate for
//! relative entropy and only sees `delta = T(rho_SE, rho_S (x) gamma(beta*_0))`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, BipartiteState, CMatrix, DensityMatrix, HermitianMatrix, Subsystem};
use crate::thermo::{self, BetaSolveConfig, EnvHamiltonian, ExtReal};

/// Tolerance on the perturbation constraints.
pub const PERTURBATION_TOL: f64 = 1e-11;

/// `-p ln p - (1 - p) ln(1 - p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::DomainError(format!("binary entropy argument {p} outside [0, 1]")));
    }
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    Ok(h(p) + h(1.0 - p))
}

fn beta_star_0(rho_e: &DensityMatrix, env: &EnvHamiltonian) -> Result<ExtReal> {
    env.effective_beta(rho_e, &BetaSolveConfig::default())
}

fn check_env(initial: &BipartiteState, env: &EnvHamiltonian) -> Result<()> {
    if initial.d_e() != env.dim() {
        return Err(Error::InvalidInput(format!(
            "state has d_E = {} but H_E is {}-dimensional",
            initial.d_e(),
            env.dim()
        )));
    }
    Ok(())
}

/// `S(rho_SE) - S(rho_S) - S(gamma(beta*_0))`.
pub fn lambda_s(initial: &BipartiteState, env: &EnvHamiltonian) -> Result<f64> {
    check_env(initial, env)?;
    let bs = beta_star_0(&initial.environment(), env)?;
    Ok(thermo::von_neumann_entropy(initial.state())
        - thermo::von_neumann_entropy(&initial.system())
        - env.gibbs_entropy(bs))
}

/// `T(rho_SE, rho_S (x) gamma(beta*_0))`.
pub fn delta_t(initial: &BipartiteState, env: &EnvHamiltonian) -> Result<f64> {
    check_env(initial, env)?;
    let bs = beta_star_0(&initial.environment(), env)?;
    linalg::trace_distance(initial.state(), &initial.system().kron(&env.gibbs_state(bs)))
}

fn continuity_bound(delta: f64, dim: usize) -> Result<f64> {
    let delta = delta.clamp(0.0, 1.0);
    let lead = if dim > 2 { -delta * ((dim - 1) as f64).ln() } else { 0.0 };
    Ok(lead - binary_entropy(delta)?)
}

/// `-delta ln(d_S d_E - 1) - H2(delta)` with `delta` from [`delta_t`].
pub fn lambda_t(initial: &BipartiteState, env: &EnvHamiltonian) -> Result<f64> {
    continuity_bound(delta_t(initial, env)?, initial.dim())
}

/// Product-form variant: `delta = T(rho_E, gamma(beta*_0))` and the
/// logarithm sees `d_E` only.
pub fn lambda_t_prod(rho_sys: &DensityMatrix, rho_env: &DensityMatrix, env: &EnvHamiltonian) -> Result<f64> {
    let _ = rho_sys;
    if rho_env.dim() != env.dim() {
        return Err(Error::InvalidInput("rho_E and H_E dimensions differ".into()));
    }
    let bs = beta_star_0(rho_env, env)?;
    continuity_bound(linalg::trace_distance(rho_env, &env.gibbs_state(bs))?, env.dim())
}

/// Outcome of a Pinsker-type sufficient condition `lhs >= rhs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SufficientCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl SufficientCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        SufficientCheck { holds: lhs >= rhs, lhs, rhs }
    }
}

fn gamma_divergence_0(rho_e: &DensityMatrix, beta0: f64, env: &EnvHamiltonian) -> Result<f64> {
    if !beta0.is_finite() {
        return Err(Error::InvalidInput(format!("beta_0 must be finite, got {beta0}")));
    }
    let bs = beta_star_0(rho_e, env)?;
    env.gibbs_divergence(bs, ExtReal::Finite(beta0))
        .finite()
        .ok_or_else(|| Error::DomainError("D(gamma(beta*_0) || gamma(beta_0)) diverged".into()))
}

fn final_distance(fin: &DensityMatrix, beta_tau: f64, env: &EnvHamiltonian) -> Result<f64> {
    if !beta_tau.is_finite() {
        return Err(Error::InvalidInput(format!("beta_tau must be finite, got {beta_tau}")));
    }
    if fin.dim() != env.dim() {
        return Err(Error::InvalidInput("final environment and H_E dimensions differ".into()));
    }
    linalg::trace_distance(fin, &env.gibbs_state(ExtReal::Finite(beta_tau)))
}

/// `T(sigma_E, gamma(beta_tau))^2 >= (D_gamma(beta_0) - Lambda_T) / 2`.
pub fn sufficient_nonneg_general(
    fin: &BipartiteState,
    beta_tau: f64,
    initial: &BipartiteState,
    beta0: f64,
    env: &EnvHamiltonian,
) -> Result<SufficientCheck> {
    check_env(initial, env)?;
    let t = final_distance(&fin.environment(), beta_tau, env)?;
    let dg = gamma_divergence_0(&initial.environment(), beta0, env)?;
    Ok(SufficientCheck::new(t * t, 0.5 * (dg - lambda_t(initial, env)?)))
}

/// `T(sigma_E, gamma(beta_tau))^2 >= (D_gamma(beta_0) - Lambda'_T) / 2` for
/// a product initial state.
pub fn sufficient_nonneg_product(
    fin_env: &DensityMatrix,
    beta_tau: f64,
    rho_sys: &DensityMatrix,
    rho_env: &DensityMatrix,
    beta0: f64,
    env: &EnvHamiltonian,
) -> Result<SufficientCheck> {
    let t = final_distance(fin_env, beta_tau, env)?;
    let dg = gamma_divergence_0(rho_env, beta0, env)?;
    Ok(SufficientCheck::new(t * t, 0.5 * (dg - lambda_t_prod(rho_sys, rho_env, env)?)))
}

/// `rho_S (x) gamma(beta) + chi` with `tr_E chi = 0` and `tr_S chi` free of
/// diagonal entries in the eigenbasis of `H_E`.
///
/// The constraints keep `rho_S` and the level occupations of the
/// environment fixed, so `beta*_0 = beta`.
#[derive(Clone, Debug)]
pub struct PerturbedInitial {
    pub rho_sys: DensityMatrix,
    pub beta: f64,
    pub chi: HermitianMatrix,
    state: BipartiteState,
}

impl PerturbedInitial {
    pub fn state(&self) -> &BipartiteState {
        &self.state
    }

    pub fn into_state(self) -> BipartiteState {
        self.state
    }

    /// `||chi||_1 / 2`, which equals the trace distance to the reference.
    pub fn delta_t(&self) -> f64 {
        0.5 * self.chi.trace_norm()
    }
}

pub fn make_perturbed_initial(
    rho_sys: &DensityMatrix,
    beta: f64,
    chi: &HermitianMatrix,
    env: &EnvHamiltonian,
) -> Result<PerturbedInitial> {
    if !beta.is_finite() {
        return Err(Error::InvalidInput(format!("beta must be finite, got {beta}")));
    }
    let (ds, de) = (rho_sys.dim(), env.dim());
    if chi.dim() != ds * de {
        return Err(Error::InvalidInput(format!("chi is {0}x{0}, expected {1}x{1}", chi.dim(), ds * de)));
    }
    let chi_s = linalg::partial_trace_operator(chi, ds, de, Subsystem::System)?;
    if chi_s.max_abs() > PERTURBATION_TOL {
        return Err(Error::InvalidPerturbation(format!("tr_E chi has entries up to {:e}", chi_s.max_abs())));
    }
    let chi_e = linalg::partial_trace_operator(chi, ds, de, Subsystem::Environment)?;
    let v = env.eigen().vectors.as_matrix();
    let rotated: CMatrix = v.adjoint() * chi_e.as_matrix() * v;
    let diag = rotated.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if diag > PERTURBATION_TOL {
        return Err(Error::InvalidPerturbation(format!("tr_S chi has H_E-diagonal entries up to {diag:e}")));
    }
    let reference = rho_sys.kron(&env.gibbs_state(ExtReal::Finite(beta)));
    let sum = reference.as_hermitian().add(chi)?;
    let state = DensityMatrix::new(sum)
        .map_err(|e| Error::InvalidState(format!("rho_S (x) gamma + chi is not a density matrix: {e}")))?;
    Ok(PerturbedInitial {
        rho_sys: rho_sys.clone(),
        beta,
        chi: chi.clone(),
        state: BipartiteState::new(ds, de, state)?,
    })
}

/// Removes from `x` the parts that violate the perturbation constraints:
/// `tr_E x (x) I / d_E`, then the `H_E`-diagonal of the environment marginal.
pub fn project_perturbation(x: &HermitianMatrix, d_s: usize, env: &EnvHamiltonian) -> Result<HermitianMatrix> {
    let de = env.dim();
    if x.dim() != d_s * de {
        return Err(Error::InvalidInput(format!("operator is {0}x{0}, expected {1}x{1}", x.dim(), d_s * de)));
    }
    let xs = linalg::partial_trace_operator(x, d_s, de, Subsystem::System)?;
    let y = x.sub(&xs.kron(&HermitianMatrix::identity(de)).scale(1.0 / de as f64))?;
    let ye = linalg::partial_trace_operator(&y, d_s, de, Subsystem::Environment)?;
    let v = env.eigen().vectors.as_matrix();
    let rotated: CMatrix = v.adjoint() * ye.as_matrix() * v;
    let diag: Vec<f64> = rotated.diagonal().iter().map(|z| z.re).collect();
    let mut d = CMatrix::zeros(de, de);
    for (k, &dk) in diag.iter().enumerate() {
        d[(k, k)] = dk.into();
    }
    let d_env = HermitianMatrix::new(v * d * v.adjoint())?;
    y.sub(&HermitianMatrix::identity(d_s).kron(&d_env).scale(1.0 / d_s as f64))
}

/// Largest `c` (up to `c_max`) with `rho_S (x) gamma(beta) + c chi >= 0`,
/// found by bisection on the smallest eigenvalue.
pub fn max_perturbation_scale(
    rho_sys: &DensityMatrix,
    beta: f64,
    chi: &HermitianMatrix,
    env: &EnvHamiltonian,
    c_max: f64,
) -> Result<f64> {
    let reference = rho_sys.kron(&env.gibbs_state(ExtReal::from_f64(beta)?));
    let min_eig = |c: f64| -> Result<f64> { Ok(reference.as_hermitian().add(&chi.scale(c))?.eigenvalues()[0]) };
    if min_eig(c_max)? >= 0.0 {
        return Ok(c_max);
    }
    let (mut lo, mut hi) = (0.0, c_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if min_eig(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Lower bounds and sufficient conditions attached to a report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "lambda_S")]
    pub lambda_s: f64,
    #[serde(rename = "lambda_T")]
    pub lambda_t: f64,
    #[serde(rename = "lambda_T_prod")]
    pub lambda_t_prod: Option<f64>,
    #[serde(rename = "delta_T")]
    pub delta_t: f64,
    pub d_gamma_0: f64,
    pub sufficient_general: bool,
    pub sufficient_general_lhs: f64,
    pub sufficient_general_rhs: f64,
    pub sufficient_product: Option<bool>,
    pub sufficient_product_lhs: Option<f64>,
    pub sufficient_product_rhs: Option<f64>,
}

/// Largest entry of `rho_SE - rho_S (x) rho_E` allowed for the product form.
pub const PRODUCT_TOL: f64 = 1e-12;

/// Whether a joint state factorizes, within [`PRODUCT_TOL`].
pub fn is_product(rho: &BipartiteState) -> bool {
    let prod = rho.system().kron(&rho.environment());
    (rho.state().as_matrix() - prod.as_matrix()).iter().all(|z| z.norm() <= PRODUCT_TOL)
}

/// Every bound for an initial/final pair. The product-form entries are
/// filled only when the initial state factorizes.
pub fn bound_report(
    initial: &BipartiteState,
    fin: &BipartiteState,
    beta0: f64,
    beta_tau: f64,
    env: &EnvHamiltonian,
) -> Result<BoundReport> {
    let general = sufficient_nonneg_general(fin, beta_tau, initial, beta0, env)?;
    let (lambda_t_prod, product) = if is_product(initial) {
        let (rs, re) = (initial.system(), initial.environment());
        (
            Some(lambda_t_prod(&rs, &re, env)?),
            Some(sufficient_nonneg_product(&fin.environment(), beta_tau, &rs, &re, beta0, env)?),
        )
    } else {
        (None, None)
    };
    Ok(BoundReport {
        lambda_s: lambda_s(initial, env)?,
        lambda_t: lambda_t(initial, env)?,
        lambda_t_prod,
        delta_t: delta_t(initial, env)?,
        d_gamma_0: gamma_divergence_0(&initial.environment(), beta0, env)?,
        sufficient_general: general.holds,
        sufficient_general_lhs: general.lhs,
        sufficient_general_rhs: general.rhs,
        sufficient_product: product.map(|c| c.holds),
        sufficient_product_lhs: product.map(|c| c.lhs),
        sufficient_product_rhs: product.map(|c| c.rhs),
    })
}
