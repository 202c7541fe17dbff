//! Scenario files and the simulate pipeline.
//!
//! A scenario is a JSON document with `"spec_version": 1`; see
//! `docs/scenario-schema.md` for the full layout. Matrices use the shared
//! [`MatrixJson`](crate::linalg::MatrixJson) encoding.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::dynamics::{self, HamiltonianSchedule, Segment, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{BipartiteState, DensityMatrix, HermitianMatrix};
use crate::production::{self, BetaPolicy, EpReport};
use crate::random;
use crate::thermo::{self, ExtReal};

pub const SPEC_VERSION: u32 = 1;

/// How the initial joint state is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Explicit {
        rho: DensityMatrix,
    },
    ProductGibbs {
        rho_sys: DensityMatrix,
        beta: f64,
    },
    Product {
        rho_sys: DensityMatrix,
        rho_env: DensityMatrix,
    },
    Perturbed {
        rho_sys: DensityMatrix,
        beta: f64,
        chi: HermitianMatrix,
    },
    /// Wishart state drawn from the scenario seed.
    Random {
        #[serde(default)]
        rank: Option<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub d_s: usize,
    pub d_e: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spec_version: u32,
    pub name: String,
    pub dims: Dims,
    pub h_env: HermitianMatrix,
    pub segments: Vec<Segment>,
    pub initial: InitialSpec,
    pub policy: BetaPolicy,
    pub steps_per_segment: usize,
    #[serde(default)]
    pub seed: u64,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::InvalidInput(format!("scenario JSON: {e}"))
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(parse_error)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Checks version, dimensions and the policy range without evolving.
    pub fn validate(&self) -> Result<()> {
        if self.spec_version != SPEC_VERSION {
            return Err(Error::InvalidInput(format!("unsupported spec_version {}", self.spec_version)));
        }
        if self.steps_per_segment == 0 {
            return Err(Error::InvalidInput("steps_per_segment must be at least 1".into()));
        }
        let sched = self.schedule()?;
        self.policy.validate(sched.duration())?;
        self.initial_state(&sched)?;
        Ok(())
    }

    pub fn schedule(&self) -> Result<HamiltonianSchedule> {
        if self.h_env.dim() != self.dims.d_e {
            return Err(Error::InvalidInput(format!(
                "h_env is {0}x{0} but d_E = {1}",
                self.h_env.dim(),
                self.dims.d_e
            )));
        }
        let sched = HamiltonianSchedule::new(self.h_env.clone(), self.segments.clone())?;
        if sched.d_s() != self.dims.d_s {
            return Err(Error::InvalidInput(format!(
                "segments act on d_S = {} but dims say {}",
                sched.d_s(),
                self.dims.d_s
            )));
        }
        Ok(sched)
    }

    pub fn initial_state(&self, sched: &HamiltonianSchedule) -> Result<BipartiteState> {
        let Dims { d_s, d_e } = self.dims;
        let check = |rho: &DensityMatrix, d: usize, what: &str| -> Result<()> {
            if rho.dim() != d {
                return Err(Error::InvalidInput(format!("{what} is {}-dimensional, expected {d}", rho.dim())));
            }
            Ok(())
        };
        let env = sched.env();
        match &self.initial {
            InitialSpec::Explicit { rho } => BipartiteState::new(d_s, d_e, rho.clone()),
            InitialSpec::ProductGibbs { rho_sys, beta } => {
                check(rho_sys, d_s, "rho_sys")?;
                BipartiteState::product(rho_sys, &env.gibbs_state(ExtReal::from_f64(*beta)?))
            }
            InitialSpec::Product { rho_sys, rho_env } => {
                check(rho_sys, d_s, "rho_sys")?;
                check(rho_env, d_e, "rho_env")?;
                BipartiteState::product(rho_sys, rho_env)
            }
            InitialSpec::Perturbed { rho_sys, beta, chi } => {
                check(rho_sys, d_s, "rho_sys")?;
                Ok(bounds::make_perturbed_initial(rho_sys, *beta, chi, env)?.into_state())
            }
            InitialSpec::Random { rank } => {
                let mut rng = random::seeded(self.seed);
                let r = rank.unwrap_or(d_s * d_e);
                if r == 0 || r > d_s * d_e {
                    return Err(Error::InvalidInput(format!("random rank {r} outside 1..={}", d_s * d_e)));
                }
                BipartiteState::new(d_s, d_e, random::wishart_density_rank(&mut rng, d_s * d_e, r))
            }
        }
    }
}

/// Report file contents: scenario metadata plus the entropy-production report.
#[derive(Clone, Debug, Serialize)]
pub struct SimulationReport {
    pub spec_version: u32,
    pub scenario: String,
    pub d_s: usize,
    pub d_e: usize,
    pub steps_per_segment: usize,
    pub duration: f64,
    pub policy: BetaPolicy,
    pub unitarity_defect: f64,
    pub joint_entropy_drift: f64,
    #[serde(flatten)]
    pub report: EpReport,
}

pub struct Simulation {
    pub trajectory: Trajectory,
    pub report: SimulationReport,
}

impl Simulation {
    pub fn report_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.report).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = Vec::new();
        self.trajectory.write_csv(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("CSV is ASCII")
    }
}

/// Evolves a scenario and builds its report. `steps` overrides the file's
/// `steps_per_segment`.
pub fn run_simulate(scenario: &Scenario, steps: Option<usize>) -> Result<Simulation> {
    scenario.validate()?;
    let steps = steps.unwrap_or(scenario.steps_per_segment);
    let sched = scenario.schedule()?;
    let initial = scenario.initial_state(&sched)?;
    let trajectory = dynamics::evolve(&initial, &sched, steps)?;
    let report = production::build_report(&trajectory, &scenario.policy)?;
    let s0 = thermo::von_neumann_entropy(initial.state());
    let drift = (0..trajectory.len())
        .step_by((trajectory.len() / 16).max(1))
        .chain(std::iter::once(trajectory.len() - 1))
        .map(|k| (trajectory.joint_entropy(k) - s0).abs())
        .fold(0.0, f64::max);
    let report = SimulationReport {
        spec_version: SPEC_VERSION,
        scenario: scenario.name.clone(),
        d_s: scenario.dims.d_s,
        d_e: scenario.dims.d_e,
        steps_per_segment: steps,
        duration: sched.duration(),
        policy: scenario.policy.clone(),
        unitarity_defect: trajectory.propagator().defect(),
        joint_entropy_drift: drift,
        report,
    };
    Ok(Simulation { trajectory, report })
}

/// One row of a sweep.
#[derive(Clone, Debug)]
pub struct SweepMember {
    pub seed: u64,
    pub beta: Option<f64>,
    pub report: EpReport,
}

/// Reruns a scenario over `count` consecutive seeds starting at `seed`,
/// and, when `betas` is non-empty, over each constant policy temperature.
/// Members run in parallel and come back in a fixed order.
pub fn run_sweep(
    scenario: &Scenario,
    seed: u64,
    count: usize,
    betas: &[f64],
    steps: Option<usize>,
) -> Result<Vec<SweepMember>> {
    use rayon::prelude::*;

    if count == 0 {
        return Err(Error::InvalidInput("sweep count must be at least 1".into()));
    }
    if let Some(b) = betas.iter().find(|b| !b.is_finite()) {
        return Err(Error::InvalidInput(format!("sweep beta {b} is not finite")));
    }
    scenario.validate()?;
    let beta_axis: Vec<Option<f64>> =
        if betas.is_empty() { vec![None] } else { betas.iter().copied().map(Some).collect() };
    let jobs: Vec<(u64, Option<f64>)> =
        (0..count as u64).flat_map(|k| beta_axis.iter().map(move |&b| (seed.wrapping_add(k), b))).collect();
    jobs.into_par_iter()
        .map(|(s, b)| {
            let mut sc = scenario.clone();
            sc.seed = s;
            if let Some(beta) = b {
                sc.policy = BetaPolicy::Constant { beta };
            }
            let sim = run_simulate(&sc, steps)?;
            Ok(SweepMember { seed: s, beta: b, report: sim.report.report })
        })
        .collect()
}

pub fn sweep_csv(members: &[SweepMember]) -> String {
    let mut out = format!("seed,policy_beta,{}\n", EpReport::CSV_HEADER);
    for m in members {
        let beta = m.beta.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", m.seed, beta, m.report.csv_row()));
    }
    out
}

/// Two qubits swapping an excitation through `g (|01><10| + |10><01|)`,
/// with `H_S = H_E = diag(0, eps)`; the bundled example scenario.
pub fn two_qubit_exchange(eps: f64, g: f64, tau: f64, p_excited: f64, beta_env: f64) -> Result<Scenario> {
    let h = HermitianMatrix::from_real_diagonal(&[0.0, eps])?;
    let mut re = vec![vec![0.0; 4]; 4];
    re[1][2] = g;
    re[2][1] = g;
    let int = HermitianMatrix::from_parts(&re, &vec![vec![0.0; 4]; 4])?;
    let rho_sys = DensityMatrix::new(HermitianMatrix::from_real_diagonal(&[1.0 - p_excited, p_excited])?)?;
    Ok(Scenario {
        spec_version: SPEC_VERSION,
        name: "two_qubit_exchange".into(),
        dims: Dims { d_s: 2, d_e: 2 },
        h_env: h.clone(),
        segments: vec![Segment::constant(0.0, tau, h, int)],
        initial: InitialSpec::ProductGibbs { rho_sys, beta: beta_env },
        policy: BetaPolicy::Constant { beta: beta_env },
        steps_per_segment: 1000,
        seed: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_simulate() {
        let sc = two_qubit_exchange(1.0, 0.3, 2.0, 0.8, 0.5).unwrap();
        let back = Scenario::from_json(&sc.to_json()).unwrap();
        assert_eq!(back, sc);
        let sim = run_simulate(&back, Some(200)).unwrap();
        assert!(sim.report.report.residual_eq17 <= 1e-8);
        assert!(sim.report.unitarity_defect < 1e-9);
        assert!(sim.report_json().contains("\"scenario\": \"two_qubit_exchange\""));
        assert_eq!(sim.trajectory_csv().lines().count(), 202);
        // same input, same bytes
        assert_eq!(sim.report_json(), run_simulate(&back, Some(200)).unwrap().report_json());
    }

    #[test]
    fn validation_errors_are_input_errors() {
        let mut sc = two_qubit_exchange(1.0, 0.3, 2.0, 0.8, 0.5).unwrap();
        sc.dims.d_e = 3;
        assert!(matches!(sc.validate(), Err(Error::InvalidInput(_))));
        let mut sc = two_qubit_exchange(1.0, 0.3, 2.0, 0.8, 0.5).unwrap();
        sc.spec_version = 2;
        assert!(sc.validate().is_err());
        let mut sc = two_qubit_exchange(1.0, 0.3, 2.0, 0.8, 0.5).unwrap();
        sc.policy = BetaPolicy::Tabulated { times: vec![0.0, 1.0], betas: vec![0.0, 1.0] };
        assert!(sc.validate().is_err());
        assert!(Scenario::from_json("{").is_err());
        assert!(Scenario::from_json(r#"{"spec_version":1}"#).is_err());
    }

    #[test]
    fn identity_schedule_gives_zero_production() {
        let mut sc = two_qubit_exchange(1.0, 0.0, 1.0, 0.3, 0.7).unwrap();
        sc.segments[0].h_sys = HermitianMatrix::zeros(2);
        let sim = run_simulate(&sc, Some(10)).unwrap();
        assert!(sim.report.report.delta_sigma.abs() < 1e-10);
    }

    #[test]
    fn sweep_members() {
        let mut sc = two_qubit_exchange(1.0, 0.3, 1.0, 0.3, 0.7).unwrap();
        sc.initial = InitialSpec::Random { rank: None };
        let members = run_sweep(&sc, 3, 2, &[0.1, 0.5], Some(50)).unwrap();
        assert_eq!(members.len(), 4);
        assert_eq!((members[1].seed, members[1].beta), (3, Some(0.5)));
        assert_ne!(members[0].report.delta_i, members[2].report.delta_i);
        let csv = sweep_csv(&members);
        assert_eq!(csv.lines().count(), 5);
        assert!(run_sweep(&sc, 0, 0, &[], None).is_err());
    }

    #[test]
    fn initial_kinds() {
        let mut sc = two_qubit_exchange(1.0, 0.3, 1.0, 0.3, 0.7).unwrap();
        sc.initial = InitialSpec::Random { rank: Some(2) };
        sc.seed = 5;
        let st = sc.initial_state(&sc.schedule().unwrap()).unwrap();
        assert!(st.state().spectrum()[..2].iter().all(|l| l.abs() < 1e-12));
        sc.initial = InitialSpec::Random { rank: Some(9) };
        assert!(sc.validate().is_err());
        sc.initial = InitialSpec::Product {
            rho_sys: DensityMatrix::maximally_mixed(2),
            rho_env: DensityMatrix::maximally_mixed(3),
        };
        assert!(sc.validate().is_err());
        let text = r#"{"kind":"perturbed","rho_sys":{"dim":2,"re":[[0.5,0],[0,0.5]]},"beta":0.0,
            "chi":{"dim":4,"re":[[0,0,0,0],[0,0,0.1,0],[0,0.1,0,0],[0,0,0,0]]}}"#;
        sc.initial = serde_json::from_str(text).unwrap();
        assert!(sc.validate().is_ok());
    }
}
