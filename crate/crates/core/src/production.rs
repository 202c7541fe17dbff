//! Entropy production with a general effective inverse temperature.
//!
//! The unified quantity compares the joint state against the reference
//! `rho_S(t) (x) gamma_E(beta_t)` at both ends of the protocol:
//!
//! ```text
//! dSigma(b0, btau) = D(sigma_SE || sigma_S (x) gamma(btau)) - D(rho_SE || rho_S (x) gamma(b0))
//!                  = dI + D(sigma_E || gamma(btau)) - D(rho_E || gamma(b0))
//! ```
//!
//! It splits into a Clausius part, `dS_S + int beta_t d/dt tr[rho_E H_E] dt`,
//! plus a correction driven by `d beta_t / dt` that vanishes for a constant
//! temperature and for the energy-matching temperature `beta*_t`.
//! Endpoint-only quantities are computed in closed form; only the Clausius
//! integral and the correction for time-varying policies use trapezoidal
//! quadrature over the trajectory grid.

use serde::{Deserialize, Serialize};

use crate::bounds::{self, BoundReport};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::{self, BipartiteState, HermitianMatrix};
use crate::thermo::{self, BetaSolveConfig, EnvHamiltonian, ExtReal};

/// How `beta_t` is chosen along a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BetaPolicy {
    Constant {
        beta: f64,
    },
    EnergyMatching,
    /// Piecewise-linear interpolation of `(times, betas)`.
    Tabulated {
        times: Vec<f64>,
        betas: Vec<f64>,
    },
}

impl BetaPolicy {
    pub fn tabulated(times: Vec<f64>, betas: Vec<f64>) -> Result<Self> {
        let p = BetaPolicy::Tabulated { times, betas };
        p.check_table()?;
        Ok(p)
    }

    fn check_table(&self) -> Result<()> {
        match self {
            BetaPolicy::Constant { beta } if !beta.is_finite() => {
                Err(Error::InvalidInput(format!("constant beta must be finite, got {beta}")))
            }
            BetaPolicy::Tabulated { times, betas } => {
                if times.len() < 2 || times.len() != betas.len() {
                    return Err(Error::InvalidInput(
                        "tabulated policy needs matching times/betas with at least two knots".into(),
                    ));
                }
                if times.iter().chain(betas).any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput("tabulated policy has non-finite values".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidInput("tabulated times must be strictly ascending".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Checks the policy is defined on `[0, tau]`.
    pub fn validate(&self, tau: f64) -> Result<()> {
        self.check_table()?;
        if let BetaPolicy::Tabulated { times, .. } = self {
            let slack = 1e-12 * tau.abs().max(1.0);
            if times[0] > slack || *times.last().unwrap() < tau - slack {
                return Err(Error::InvalidInput(format!(
                    "tabulated policy covers [{}, {}] but the trajectory spans [0, {tau}]",
                    times[0],
                    times.last().unwrap()
                )));
            }
        }
        Ok(())
    }

    fn interpolate(times: &[f64], betas: &[f64], t: f64) -> f64 {
        let n = times.len();
        if t <= times[0] {
            return betas[0];
        }
        if t >= times[n - 1] {
            return betas[n - 1];
        }
        let j = times.partition_point(|&x| x <= t) - 1;
        let w = (t - times[j]) / (times[j + 1] - times[j]);
        betas[j] + w * (betas[j + 1] - betas[j])
    }

    /// `beta_t` at time `t` for the explicit policies.
    pub fn beta_at_time(&self, t: f64) -> Option<f64> {
        match self {
            BetaPolicy::Constant { beta } => Some(*beta),
            BetaPolicy::EnergyMatching => None,
            BetaPolicy::Tabulated { times, betas } => Some(Self::interpolate(times, betas, t)),
        }
    }

    /// Policy temperatures on the trajectory grid; must all be finite.
    pub fn betas_on(&self, traj: &Trajectory) -> Result<Vec<f64>> {
        self.validate(traj.duration())?;
        match self {
            BetaPolicy::EnergyMatching => traj
                .beta_star
                .iter()
                .zip(&traj.times)
                .map(|(b, t)| {
                    b.finite().ok_or_else(|| {
                        Error::InvalidInput(format!("energy-matching beta* is {b} at t = {t}; finite values required"))
                    })
                })
                .collect(),
            _ => Ok(traj.times.iter().map(|&t| self.beta_at_time(t).unwrap()).collect()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            BetaPolicy::Constant { .. } => "constant",
            BetaPolicy::EnergyMatching => "energy_matching",
            BetaPolicy::Tabulated { .. } => "tabulated",
        }
    }
}

fn finite_beta(b: f64, what: &str) -> Result<()> {
    if !b.is_finite() {
        return Err(Error::InvalidInput(format!("{what} must be finite, got {b}")));
    }
    Ok(())
}

fn check_pair(initial: &BipartiteState, fin: &BipartiteState, env: &EnvHamiltonian) -> Result<()> {
    if initial.d_s() != fin.d_s() || initial.d_e() != fin.d_e() || initial.d_e() != env.dim() {
        return Err(Error::InvalidInput(format!(
            "states {}x{} and {}x{} with d_E(H_E) = {}",
            initial.d_s(),
            initial.d_e(),
            fin.d_s(),
            fin.d_e(),
            env.dim()
        )));
    }
    Ok(())
}

fn finite_divergence(d: ExtReal) -> Result<f64> {
    d.finite().ok_or_else(|| Error::DomainError("relative entropy to a finite-temperature Gibbs state diverged".into()))
}

/// `dI + D(sigma_E || gamma(beta_tau)) - D(rho_E || gamma(beta0))`.
pub fn delta_sigma(
    initial: &BipartiteState,
    fin: &BipartiteState,
    beta0: f64,
    beta_tau: f64,
    env: &EnvHamiltonian,
) -> Result<f64> {
    check_pair(initial, fin, env)?;
    finite_beta(beta0, "beta_0")?;
    finite_beta(beta_tau, "beta_tau")?;
    let d_i = thermo::mutual_information(fin) - thermo::mutual_information(initial);
    let d_fin = thermo::relative_entropy(&fin.environment(), &env.gibbs_state(ExtReal::Finite(beta_tau)))?;
    let d_init = thermo::relative_entropy(&initial.environment(), &env.gibbs_state(ExtReal::Finite(beta0)))?;
    Ok(d_i + finite_divergence(d_fin)? - finite_divergence(d_init)?)
}

/// Same quantity from the joint-space relative entropies.
pub fn delta_sigma_joint(
    initial: &BipartiteState,
    fin: &BipartiteState,
    beta0: f64,
    beta_tau: f64,
    env: &EnvHamiltonian,
) -> Result<f64> {
    check_pair(initial, fin, env)?;
    finite_beta(beta0, "beta_0")?;
    finite_beta(beta_tau, "beta_tau")?;
    Ok(reference_divergence(fin, beta_tau, env)? - reference_divergence(initial, beta0, env)?)
}

/// `D(rho_SE || rho_S (x) gamma_E(beta))`.
pub fn reference_divergence(rho: &BipartiteState, beta: f64, env: &EnvHamiltonian) -> Result<f64> {
    let reference = rho.system().kron(&env.gibbs_state(ExtReal::Finite(beta)));
    finite_divergence(thermo::relative_entropy(rho.state(), &reference)?)
}

fn delta_system_entropy(traj: &Trajectory) -> f64 {
    traj.system_entropy(traj.len() - 1) - traj.system_entropy(0)
}

/// `dS_S + int beta_t d/dt tr[rho_E H_E] dt`.
///
/// A constant policy telescopes to `dS_S + beta (E_tau - E_0)`; other
/// policies use the trapezoidal rule with the analytic energy rate, taking
/// one-sided rates at segment boundaries.
pub fn delta_sigma_clausius(traj: &Trajectory, policy: &BetaPolicy) -> Result<f64> {
    let ds = delta_system_entropy(traj);
    if let BetaPolicy::Constant { beta } = policy {
        policy.validate(traj.duration())?;
        let n = traj.len() - 1;
        return Ok(ds + beta * (traj.env_energy[n] - traj.env_energy[0]));
    }
    let betas = policy.betas_on(traj)?;
    let mut integral = 0.0;
    for k in 0..traj.len() - 1 {
        let dt = traj.times[k + 1] - traj.times[k];
        integral +=
            0.5 * dt * (betas[k] * traj.env_energy_rate_right(k) + betas[k + 1] * traj.env_energy_rate_left(k + 1));
    }
    Ok(ds + integral)
}

/// `int (d beta_t/dt) (E_gamma(beta*_t) - E_gamma(beta_t)) dt`.
///
/// `beta_t` is linear on every grid interval, so each interval contributes
/// its increment of `beta` times the mean of the integrand at its ends.
pub fn delta_d(traj: &Trajectory, policy: &BetaPolicy) -> Result<f64> {
    if let BetaPolicy::Constant { .. } = policy {
        policy.validate(traj.duration())?;
        return Ok(0.0);
    }
    let betas = policy.betas_on(traj)?;
    let env = traj.env();
    let g: Vec<f64> =
        betas.iter().zip(&traj.beta_star).map(|(&b, &bs)| env.energy(bs) - env.energy(ExtReal::Finite(b))).collect();
    Ok((0..traj.len() - 1).map(|k| (betas[k + 1] - betas[k]) * 0.5 * (g[k] + g[k + 1])).sum())
}

/// `dSigma* = dS_S + dS_E + dS_gamma`, endpoint-only.
///
/// `dS_gamma = {S(gamma(beta*_tau)) - S(sigma_E)} - {S(gamma(beta*_0)) - S(rho_E)}`.
pub fn delta_sigma_star(traj: &Trajectory) -> Result<f64> {
    Ok(entropy_ledger(traj).sigma_star())
}

/// Entropy changes at the two ends of a trajectory.
#[derive(Clone, Copy, Debug)]
struct EntropyLedger {
    d_s_sys: f64,
    d_s_env: f64,
    d_s_gamma: f64,
    d_mutual: f64,
}

impl EntropyLedger {
    fn sigma_star(&self) -> f64 {
        self.d_s_sys + self.d_s_env + self.d_s_gamma
    }
}

fn entropy_ledger(traj: &Trajectory) -> EntropyLedger {
    let (first, last) = (traj.initial(), traj.last());
    let env = traj.env();
    let s_sys = |s: &BipartiteState| thermo::von_neumann_entropy(&s.system());
    let s_env = |s: &BipartiteState| thermo::von_neumann_entropy(&s.environment());
    let (s_e0, s_et) = (s_env(first), s_env(last));
    let n = traj.len() - 1;
    let gamma_gap = |k: usize, s_e: f64| env.gibbs_entropy(traj.beta_star[k]) - s_e;
    EntropyLedger {
        d_s_sys: s_sys(last) - s_sys(first),
        d_s_env: s_et - s_e0,
        d_s_gamma: gamma_gap(n, s_et) - gamma_gap(0, s_e0),
        d_mutual: thermo::mutual_information(last) - thermo::mutual_information(first),
    }
}

/// The three terms of the entropy production rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateTerms {
    /// `dS(rho_S)/dt`.
    pub entropy_rate: f64,
    /// `-beta dQ/dt`.
    pub heat_term: f64,
    /// `beta_dot (E_gamma(beta*) - E_gamma(beta))`.
    pub temperature_term: f64,
}

impl RateTerms {
    pub fn total(&self) -> f64 {
        self.entropy_rate + self.heat_term + self.temperature_term
    }
}

/// Entropy production rate at one instant, split into its terms.
///
/// `dS(rho_S)/dt` is a symmetric difference over a short auxiliary
/// evolution under the frozen `H_total`, with step `1e-6` times the inverse
/// spectral spread of `H_total` (at most `1e-6`).
pub fn ep_rate_terms(
    rho: &BipartiteState,
    h_total: &HermitianMatrix,
    env: &EnvHamiltonian,
    beta: f64,
    beta_dot: f64,
) -> Result<RateTerms> {
    finite_beta(beta, "beta")?;
    finite_beta(beta_dot, "beta_dot")?;
    let energy_rate = crate::dynamics::env_energy_rate(rho, h_total, env.matrix())?;
    let ev = h_total.eigenvalues();
    let spread = (ev[ev.len() - 1] - ev[0]).max(1.0);
    let h = 1e-6 / spread;
    let s_sys_after = |dt: f64| -> Result<f64> {
        let u = linalg::unitary_step(h_total, dt)?;
        Ok(thermo::von_neumann_entropy(&rho.evolve(&u)?.system()))
    };
    let entropy_rate = (s_sys_after(h)? - s_sys_after(-h)?) / (2.0 * h);
    let beta_star = env.effective_beta(&rho.environment(), &BetaSolveConfig::default())?;
    let temperature_term =
        if beta_dot == 0.0 { 0.0 } else { beta_dot * (env.energy(beta_star) - env.energy(ExtReal::Finite(beta))) };
    Ok(RateTerms { entropy_rate, heat_term: beta * energy_rate, temperature_term })
}

/// `d/dt D(rho_SE(t) || rho_S(t) (x) gamma_E(beta_t))`.
pub fn ep_rate(
    rho: &BipartiteState,
    h_total: &HermitianMatrix,
    env: &EnvHamiltonian,
    beta: f64,
    beta_dot: f64,
) -> Result<f64> {
    Ok(ep_rate_terms(rho, h_total, env, beta, beta_dot)?.total())
}

/// Every entropy-production quantity for one trajectory and policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpReport {
    pub beta_0: f64,
    pub beta_tau: f64,
    pub beta_star_0: ExtReal,
    pub beta_star_tau: ExtReal,
    pub delta_sigma: f64,
    pub delta_sigma_cl: f64,
    #[serde(rename = "delta_D")]
    pub delta_d: f64,
    pub delta_sigma_star: f64,
    pub d_gamma_0: f64,
    pub d_gamma_tau: f64,
    #[serde(rename = "delta_I")]
    pub delta_i: f64,
    #[serde(rename = "delta_S_S")]
    pub delta_s_s: f64,
    #[serde(rename = "delta_S_E")]
    pub delta_s_e: f64,
    #[serde(rename = "delta_S_gamma")]
    pub delta_s_gamma: f64,
    pub residual_eq17: f64,
    pub residual_eq21: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundReport>,
}

impl EpReport {
    pub const CSV_HEADER: &'static str =
        "beta_0,beta_tau,beta_star_0,beta_star_tau,delta_sigma,delta_sigma_cl,delta_D,\
delta_sigma_star,d_gamma_0,d_gamma_tau,delta_I,delta_S_S,delta_S_E,delta_S_gamma,residual_eq17,residual_eq21";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.beta_0,
            self.beta_tau,
            self.beta_star_0,
            self.beta_star_tau,
            self.delta_sigma,
            self.delta_sigma_cl,
            self.delta_d,
            self.delta_sigma_star,
            self.d_gamma_0,
            self.d_gamma_tau,
            self.delta_i,
            self.delta_s_s,
            self.delta_s_e,
            self.delta_s_gamma,
            self.residual_eq17,
            self.residual_eq21
        )
    }
}

/// Builds the full report, including lower bounds and sufficient conditions.
///
/// Endpoint temperatures come from the policy; infinite energy-matching
/// endpoints are rejected.
pub fn build_report(traj: &Trajectory, policy: &BetaPolicy) -> Result<EpReport> {
    let env = traj.env();
    let n = traj.len() - 1;
    let (beta_0, beta_tau) = match policy {
        BetaPolicy::EnergyMatching => {
            let b = policy.betas_on(traj)?;
            (b[0], b[n])
        }
        _ => {
            policy.validate(traj.duration())?;
            (policy.beta_at_time(0.0).unwrap(), policy.beta_at_time(traj.duration()).unwrap())
        }
    };
    let (first, last) = (traj.initial(), traj.last());
    let (bs0, bst) = (traj.beta_star[0], traj.beta_star[n]);

    let sigma = delta_sigma(first, last, beta_0, beta_tau, env)?;
    let sigma_cl = delta_sigma_clausius(traj, policy)?;
    let d_corr = delta_d(traj, policy)?;
    let ledger = entropy_ledger(traj);
    let sigma_star = ledger.sigma_star();
    let d_gamma_0 = finite_divergence(env.gibbs_divergence(bs0, ExtReal::Finite(beta_0)))?;
    let d_gamma_tau = finite_divergence(env.gibbs_divergence(bst, ExtReal::Finite(beta_tau)))?;
    let bounds = bounds::bound_report(first, last, beta_0, beta_tau, env)?;

    Ok(EpReport {
        beta_0,
        beta_tau,
        beta_star_0: bs0,
        beta_star_tau: bst,
        delta_sigma: sigma,
        delta_sigma_cl: sigma_cl,
        delta_d: d_corr,
        delta_sigma_star: sigma_star,
        d_gamma_0,
        d_gamma_tau,
        delta_i: ledger.d_mutual,
        delta_s_s: ledger.d_s_sys,
        delta_s_e: ledger.d_s_env,
        delta_s_gamma: ledger.d_s_gamma,
        residual_eq17: (sigma - sigma_cl - d_corr).abs(),
        residual_eq21: (sigma - sigma_star - d_gamma_tau + d_gamma_0).abs(),
        bounds: Some(bounds),
    })
}
