//! Randomized verification of the identities and inequalities over many
//! seeded scenarios.
//!
//! Every check reduces to a number `v` that passes when `v <= tol`: an
//! absolute residual for identities, and `rhs - lhs` for inequalities of
//! the form `lhs >= rhs` (so negative values are slack).

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::dynamics::{self, HamiltonianSchedule, Segment, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{self, BipartiteState, HermitianMatrix};
use crate::production::{self, BetaPolicy};
use crate::random::{self, SeededRng};
use crate::thermo::{self, EnvHamiltonian, ExtReal};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Quadrature-limited decomposition residual.
    pub decomposition: f64,
    /// Endpoint identities.
    pub identity: f64,
    /// Slack allowed on inequalities.
    pub inequality: f64,
    /// Relative error of the finite-difference heat capacity.
    pub monotonicity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { decomposition: 1e-6, identity: 1e-8, inequality: 1e-9, monotonicity: 1e-6 }
    }
}

impl Tolerances {
    pub fn uniform(tol: f64) -> Self {
        Tolerances { decomposition: tol, identity: tol, inequality: tol, monotonicity: tol }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySuiteConfig {
    pub num_random_scenarios: usize,
    /// `(d_S, d_E)` pairs, used round-robin.
    pub dims: Vec<(usize, usize)>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub steps_per_segment: usize,
}

impl Default for VerifySuiteConfig {
    fn default() -> Self {
        VerifySuiteConfig {
            num_random_scenarios: 1000,
            dims: vec![(2, 2), (2, 3), (3, 2)],
            tolerances: Tolerances::default(),
            seed: 0,
            steps_per_segment: 1000,
        }
    }
}

impl VerifySuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_random_scenarios == 0 {
            return Err(Error::InvalidInput("num_random_scenarios must be at least 1".into()));
        }
        if self.dims.is_empty() || self.dims.iter().any(|&(s, e)| s == 0 || e < 2 || s * e > 64) {
            return Err(Error::InvalidInput("dims must be non-empty with d_S >= 1, d_E >= 2, d_S d_E <= 64".into()));
        }
        if self.steps_per_segment < 2 || !self.steps_per_segment.is_multiple_of(2) {
            return Err(Error::InvalidInput("steps_per_segment must be even and at least 2".into()));
        }
        let t = &self.tolerances;
        if [t.decomposition, t.identity, t.inequality, t.monotonicity].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidInput("tolerances must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// How the initial state of a random scenario is drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    /// Full-rank Wishart joint state.
    Joint,
    /// Product of Wishart marginals.
    Product,
    /// `rho_S (x) gamma_E(beta0)`.
    ProductGibbs,
    /// `rho_S (x) gamma_E(beta0) + chi` with a projected random `chi`.
    Perturbed,
    /// `W (rho_S (x) gamma_E(beta0)) W^dagger` with dynamics that partly undo `W`.
    Adversarial,
}

impl InitialKind {
    pub const ROTATION: [InitialKind; 5] = [
        InitialKind::Joint,
        InitialKind::Product,
        InitialKind::ProductGibbs,
        InitialKind::Perturbed,
        InitialKind::Adversarial,
    ];
}

/// A random scenario together with a tabulated `beta_t` ramp whose knots
/// sit on the time grid of any even `steps_per_segment`.
#[derive(Clone, Debug)]
pub struct RandomScenario {
    pub kind: InitialKind,
    pub initial: BipartiteState,
    pub schedule: HamiltonianSchedule,
    pub ramp: BetaPolicy,
    /// Temperature of the Gibbs factor for the structured kinds.
    pub beta0: Option<f64>,
}

fn uniform(rng: &mut SeededRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

fn random_ramp(rng: &mut SeededRng, sched: &HamiltonianSchedule) -> Result<BetaPolicy> {
    let mut times = vec![0.0];
    for seg in sched.segments() {
        times.push(0.5 * (seg.t_start + seg.t_end));
        times.push(seg.t_end);
    }
    // random walk with |d beta / dt| <= 2 between knots
    let mut betas = vec![uniform(rng, -1.5, 1.5)];
    for w in times.windows(2) {
        let last = betas[betas.len() - 1];
        betas.push(last + uniform(rng, -2.0, 2.0) * (w[1] - w[0]));
    }
    BetaPolicy::tabulated(times, betas)
}

/// Draws a scenario: a constant segment followed by a linear ramp, random
/// `H_E` with levels in `[0, 1]`, and the requested kind of initial state.
pub fn random_scenario(rng: &mut SeededRng, d_s: usize, d_e: usize, kind: InitialKind) -> Result<RandomScenario> {
    let h_env = random::random_env_hamiltonian(rng, d_e, 1.0);
    let env = EnvHamiltonian::new(h_env.clone())?;
    let rho_s = random::wishart_density(rng, d_s);
    let beta0 = uniform(rng, -2.0, 2.0);
    let gibbs = env.gibbs_state(ExtReal::Finite(beta0));
    let d = d_s * d_e;

    if kind == InitialKind::Adversarial {
        // W = exp(-i G tau); evolving under -G brings the state back towards
        // the product reference, which drives Sigma* negative.
        let tau = uniform(rng, 0.5, 1.5);
        let g = random::random_hermitian(rng, d, 0.6);
        let w = linalg::unitary_step(&g, tau)?;
        let initial = BipartiteState::product(&rho_s, &gibbs)?.evolve(&w)?;
        let strength = uniform(rng, 0.0, 0.3);
        let noise = random::random_hermitian(rng, d, strength);
        let lift = HermitianMatrix::identity(d_s).kron(&h_env);
        let h_int = g.scale(-1.0).sub(&lift)?.add(&noise)?;
        // two identical halves, so every random member has the same grid density
        let zero = HermitianMatrix::zeros(d_s);
        let segments = vec![
            Segment::constant(0.0, 0.5 * tau, zero.clone(), h_int.clone()),
            Segment::constant(0.5 * tau, tau, zero, h_int),
        ];
        let schedule = HamiltonianSchedule::new(h_env, segments)?;
        let ramp = random_ramp(rng, &schedule)?;
        return Ok(RandomScenario { kind, initial, schedule, ramp, beta0: Some(beta0) });
    }

    let t1 = uniform(rng, 0.3, 1.0);
    let t2 = t1 + uniform(rng, 0.3, 1.0);
    let h_sys = random::random_hermitian(rng, d_s, 0.5);
    let h_int = random::random_hermitian(rng, d, 0.5);
    let segments = vec![
        Segment::constant(0.0, t1, h_sys.clone(), h_int.clone()),
        Segment {
            t_start: t1,
            t_end: t2,
            h_sys,
            h_int,
            h_sys_end: Some(random::random_hermitian(rng, d_s, 0.5)),
            h_int_end: Some(random::random_hermitian(rng, d, 0.5)),
        },
    ];
    let schedule = HamiltonianSchedule::new(h_env, segments)?;
    let (initial, beta0) = match kind {
        InitialKind::Joint => (BipartiteState::new(d_s, d_e, random::wishart_density(rng, d))?, None),
        InitialKind::Product => (BipartiteState::product(&rho_s, &random::wishart_density(rng, d_e))?, None),
        InitialKind::ProductGibbs => (BipartiteState::product(&rho_s, &gibbs)?, Some(beta0)),
        InitialKind::Perturbed => {
            let x = random::random_hermitian(rng, d, 1.0);
            let chi = bounds::project_perturbation(&x, d_s, &env)?;
            let c = bounds::max_perturbation_scale(&rho_s, beta0, &chi, &env, 1.0)?;
            let chi = chi.scale(c * uniform(rng, 0.2, 0.95));
            (bounds::make_perturbed_initial(&rho_s, beta0, &chi, &env)?.into_state(), Some(beta0))
        }
        InitialKind::Adversarial => unreachable!(),
    };
    let ramp = random_ramp(rng, &schedule)?;
    Ok(RandomScenario { kind, initial, schedule, ramp, beta0 })
}

/// Pass/fail tally and worst value of one check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckSummary {
    pub name: String,
    pub evaluated: usize,
    pub failed: usize,
    pub worst: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifySummary {
    pub scenarios: usize,
    pub seed: u64,
    pub negative_sigma_star: usize,
    pub checks: Vec<CheckSummary>,
}

impl VerifySummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().map(|c| c.failed).sum()
    }
}

impl fmt::Display for VerifySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>9} {:>7} {:>12} {:>10}", "check", "evaluated", "failed", "worst", "tol")?;
        for c in &self.checks {
            let status = if c.failed == 0 { "ok" } else { "FAIL" };
            writeln!(
                f,
                "{:<28} {:>9} {:>7} {:>12.3e} {:>10.1e}  {status}",
                c.name, c.evaluated, c.failed, c.worst, c.tolerance
            )?;
        }
        writeln!(
            f,
            "scenarios: {}  seed: {}  negative Sigma*: {}",
            self.scenarios, self.seed, self.negative_sigma_star
        )?;
        write!(f, "result: {} ({} failures)", if self.passed() { "PASS" } else { "FAIL" }, self.failures())
    }
}

struct Outcome {
    values: Vec<(&'static str, f64, f64)>,
    negative_star: bool,
}

impl Outcome {
    fn push(&mut self, name: &'static str, value: f64, tol: f64) {
        self.values.push((name, value, tol));
    }
}

fn check_scenario(sc: &RandomScenario, traj: &Trajectory, rng: &mut SeededRng, tol: &Tolerances) -> Result<Outcome> {
    let mut out = Outcome { values: Vec::new(), negative_star: false };
    let env = traj.env();
    let (first, last) = (traj.initial(), traj.last());
    let n = traj.len() - 1;

    let report = production::build_report(traj, &sc.ramp)?;
    out.push("decomposition", report.residual_eq17, tol.decomposition);
    out.push("gibbs_mismatch_shift", report.residual_eq21, tol.identity);
    let (b0, bt) = (report.beta_0, report.beta_tau);
    let joint = production::delta_sigma_joint(first, last, b0, bt, env)?;
    out.push("joint_marginal_forms", (report.delta_sigma - joint).abs(), tol.identity);

    let star = report.delta_sigma_star;
    out.negative_star = star < 0.0;
    let bounds = report.bounds.as_ref().expect("build_report attaches bounds");
    let mut chain = (bounds.lambda_s - star).max(bounds.lambda_t - bounds.lambda_s);
    if let Some(lp) = bounds.lambda_t_prod {
        chain = chain.max(lp - bounds.lambda_s);
    }
    out.push("lower_bound_chain", chain, tol.identity);
    out.push("general_lower_bound", bounds.lambda_s - bounds.d_gamma_0 - report.delta_sigma, tol.identity);
    if bounds.sufficient_general {
        out.push("pinsker_general", -report.delta_sigma, tol.inequality);
    }
    if bounds.sufficient_product == Some(true) {
        out.push("pinsker_product", -report.delta_sigma, tol.inequality);
    }

    if let (Some(bs0), Some(bst)) = (traj.beta_star[0].finite(), traj.beta_star[n].finite()) {
        let em = production::delta_sigma(first, last, bs0, bst, env)?;
        out.push("energy_matching_reduction", (em - star).abs(), tol.identity);
        if traj.beta_star.iter().all(|b| b.is_finite()) {
            out.push(
                "energy_matching_correction",
                production::delta_d(traj, &BetaPolicy::EnergyMatching)?.abs(),
                tol.identity,
            );
        }
        let mut worst = f64::NEG_INFINITY;
        for _ in 0..8 {
            let b = bst + uniform(rng, -3.0, 3.0);
            worst = worst.max(star - production::delta_sigma(first, last, bs0, b, env)?);
        }
        out.push("minimality", worst, tol.inequality);
    }

    // divergence identities on the final environment
    let rho_e = last.environment();
    let bs = traj.beta_star[n];
    let gamma_star = env.gibbs_state(bs);
    let beta = uniform(rng, -4.0, 4.0);
    let d_full = thermo::relative_entropy(&rho_e, &env.gibbs_state(ExtReal::Finite(beta)))?.to_f64();
    let d_star = thermo::relative_entropy(&rho_e, &gamma_star)?.to_f64();
    let d_gamma = env.gibbs_divergence(bs, ExtReal::Finite(beta)).to_f64();
    out.push("pythagorean", (d_full - d_star - d_gamma).abs(), tol.identity);
    let s_e = thermo::von_neumann_entropy(&rho_e);
    out.push("entropy_gap_form", (d_star - (env.gibbs_entropy(bs) - s_e)).abs(), tol.identity);
    let joint_star = thermo::relative_entropy(last.state(), &last.system().kron(&gamma_star))?.to_f64();
    let entropy_form =
        thermo::von_neumann_entropy(&last.system()) + env.gibbs_entropy(bs) - thermo::von_neumann_entropy(last.state());
    out.push("joint_entropy_form", (joint_star - entropy_form).abs(), tol.identity);

    if sc.kind == InitialKind::ProductGibbs {
        let b = sc.beta0.expect("product-Gibbs scenarios carry beta0");
        let constant = production::delta_sigma(first, last, b, b, env)?;
        let mut worst = -constant;
        if let Some(bst) = traj.beta_star[n].finite() {
            worst = worst.max(-production::delta_sigma(first, last, b, bst, env)?);
        }
        out.push("second_law", worst, tol.inequality);
    }

    let b = uniform(rng, -10.0, 10.0);
    let h = 1e-5;
    let fd = (env.energy(ExtReal::Finite(b + h)) - env.energy(ExtReal::Finite(b - h))) / (2.0 * h);
    let var = env.variance(ExtReal::Finite(b));
    let rel = if var > 1e-8 { (fd + var).abs() / var } else { (fd + var).abs() };
    out.push("heat_capacity_sign", rel.max(fd), tol.monotonicity);
    Ok(out)
}

/// Runs the randomized suite. Members are independent and evaluated in
/// parallel; results are merged in member order.
pub fn run_verify(cfg: &VerifySuiteConfig) -> Result<VerifySummary> {
    cfg.validate()?;
    let outcomes: Vec<Outcome> = (0..cfg.num_random_scenarios)
        .into_par_iter()
        .map(|i| -> Result<Outcome> {
            let mut rng = random::seeded_stream(cfg.seed, i as u64);
            let (ds, de) = cfg.dims[i % cfg.dims.len()];
            let kind = InitialKind::ROTATION[i % InitialKind::ROTATION.len()];
            let sc = random_scenario(&mut rng, ds, de, kind)?;
            let traj = dynamics::evolve(&sc.initial, &sc.schedule, cfg.steps_per_segment)?;
            check_scenario(&sc, &traj, &mut rng, &cfg.tolerances)
        })
        .collect::<Result<_>>()?;

    let mut order: Vec<&'static str> = Vec::new();
    let mut table: BTreeMap<&'static str, CheckSummary> = BTreeMap::new();
    let mut negative = 0;
    for o in &outcomes {
        negative += o.negative_star as usize;
        for &(name, v, tol) in &o.values {
            let entry = table.entry(name).or_insert_with(|| {
                order.push(name);
                CheckSummary {
                    name: name.to_string(),
                    evaluated: 0,
                    failed: 0,
                    worst: f64::NEG_INFINITY,
                    tolerance: tol,
                }
            });
            entry.evaluated += 1;
            // NaN counts as a failure
            if v.is_nan() || v > tol {
                entry.failed += 1;
            }
            entry.worst = if v.is_nan() { f64::NAN } else { entry.worst.max(v) };
        }
    }
    Ok(VerifySummary {
        scenarios: cfg.num_random_scenarios,
        seed: cfg.seed,
        negative_sigma_star: negative,
        checks: order.into_iter().map(|n| table.remove(n).unwrap()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(num: usize) -> VerifySuiteConfig {
        VerifySuiteConfig { num_random_scenarios: num, ..Default::default() }
    }

    #[test]
    fn smoke_run_passes() {
        let s = run_verify(&small(10)).unwrap();
        assert!(s.passed(), "{s}");
        assert!(s.checks.iter().any(|c| c.name == "second_law"));
        let text = s.to_string();
        assert!(text.contains("result: PASS"));
    }

    #[test]
    fn single_scenario() {
        let s = run_verify(&small(1)).unwrap();
        assert_eq!(s.scenarios, 1);
        assert!(s.passed());
    }

    #[test]
    fn zero_tolerance_fails() {
        let cfg = VerifySuiteConfig { tolerances: Tolerances::uniform(0.0), ..small(3) };
        let s = run_verify(&cfg).unwrap();
        assert!(!s.passed());
    }

    #[test]
    fn deterministic() {
        assert_eq!(run_verify(&small(5)).unwrap(), run_verify(&small(5)).unwrap());
    }

    #[test]
    fn config_validation() {
        assert!(run_verify(&small(0)).is_err());
        let cfg = VerifySuiteConfig { dims: vec![(2, 1)], ..small(1) };
        assert!(cfg.validate().is_err());
        let cfg = VerifySuiteConfig { steps_per_segment: 3, ..small(1) };
        assert!(cfg.validate().is_err());
        let parsed: VerifySuiteConfig = serde_json::from_str(r#"{"num_random_scenarios": 4}"#).unwrap();
        assert_eq!(parsed.steps_per_segment, 1000);
    }

    #[test]
    fn adversarial_members_go_negative() {
        let mut neg = 0;
        for i in 0..40 {
            let mut rng = random::seeded_stream(7, i);
            let sc = random_scenario(&mut rng, 2, 2, InitialKind::Adversarial).unwrap();
            let traj = dynamics::evolve(&sc.initial, &sc.schedule, 200).unwrap();
            if production::delta_sigma_star(&traj).unwrap() < 0.0 {
                neg += 1;
            }
        }
        assert!(neg >= 10, "{neg}");
    }
}
