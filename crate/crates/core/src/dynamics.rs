//! Time-ordered unitary evolution of the joint state.
//!
//! The schedule is piecewise: each segment carries a system Hamiltonian and
//! an interaction, optionally ramped linearly to end values. Substeps use the
//! midpoint Hamiltonian, `exp(-i H(t + dt/2) dt)`, which is exactly unitary
//! and second-order accurate. Constant segments reuse one step unitary and
//! are exact up to rounding.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, BipartiteState, CMatrix, HermitianMatrix, UnitaryMatrix, C64};
use crate::thermo::{self, BetaSolveConfig, EnvHamiltonian, ExtReal};

const CONTIGUITY_TOL: f64 = 1e-12;

/// One time window of the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t_start: f64,
    pub t_end: f64,
    pub h_sys: HermitianMatrix,
    pub h_int: HermitianMatrix,
    /// Value of `h_sys` at `t_end` for a linear ramp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_sys_end: Option<HermitianMatrix>,
    /// Value of `h_int` at `t_end` for a linear ramp.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_int_end: Option<HermitianMatrix>,
}

impl Segment {
    pub fn constant(t_start: f64, t_end: f64, h_sys: HermitianMatrix, h_int: HermitianMatrix) -> Self {
        Self { t_start, t_end, h_sys, h_int, h_sys_end: None, h_int_end: None }
    }

    pub fn is_time_independent(&self) -> bool {
        self.h_sys_end.as_ref().is_none_or(|h| *h == self.h_sys)
            && self.h_int_end.as_ref().is_none_or(|h| *h == self.h_int)
    }

    fn ramp(start: &HermitianMatrix, end: Option<&HermitianMatrix>, frac: f64) -> HermitianMatrix {
        match end {
            None => start.clone(),
            Some(e) => start.scale(1.0 - frac).add(&e.scale(frac)).expect("validated dimensions"),
        }
    }

    fn sys_at(&self, t: f64) -> HermitianMatrix {
        Self::ramp(&self.h_sys, self.h_sys_end.as_ref(), self.fraction(t))
    }

    fn int_at(&self, t: f64) -> HermitianMatrix {
        Self::ramp(&self.h_int, self.h_int_end.as_ref(), self.fraction(t))
    }

    fn fraction(&self, t: f64) -> f64 {
        ((t - self.t_start) / (self.t_end - self.t_start)).clamp(0.0, 1.0)
    }
}

/// `H(t) = H_S(t) (x) I + I (x) H_E + H_SE(t)` over contiguous segments
/// covering `[0, tau]`.
#[derive(Clone, Debug)]
pub struct HamiltonianSchedule {
    env: EnvHamiltonian,
    d_s: usize,
    segments: Vec<Segment>,
    env_lift: HermitianMatrix,
}

impl HamiltonianSchedule {
    pub fn new(h_env: HermitianMatrix, segments: Vec<Segment>) -> Result<Self> {
        let env = EnvHamiltonian::new(h_env)?;
        let first = segments.first().ok_or_else(|| Error::InvalidSchedule("schedule has no segments".into()))?;
        let d_s = first.h_sys.dim();
        let d_e = env.dim();
        if first.t_start.abs() > CONTIGUITY_TOL {
            return Err(Error::InvalidSchedule(format!("schedule starts at {} instead of 0", first.t_start)));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.t_start.is_finite() && seg.t_end.is_finite()) || seg.t_end <= seg.t_start {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} has empty or invalid span [{}, {}]",
                    seg.t_start, seg.t_end
                )));
            }
            if i > 0 && (seg.t_start - segments[i - 1].t_end).abs() > CONTIGUITY_TOL {
                return Err(Error::InvalidSchedule(format!(
                    "gap or overlap between segment {} (ends {}) and segment {i} (starts {})",
                    i - 1,
                    segments[i - 1].t_end,
                    seg.t_start
                )));
            }
            let sys_ok = seg.h_sys.dim() == d_s && seg.h_sys_end.as_ref().is_none_or(|h| h.dim() == d_s);
            let int_ok = seg.h_int.dim() == d_s * d_e && seg.h_int_end.as_ref().is_none_or(|h| h.dim() == d_s * d_e);
            if !sys_ok || !int_ok {
                return Err(Error::InvalidInput(format!(
                    "segment {i} dimensions inconsistent with d_S = {d_s}, d_E = {d_e}"
                )));
            }
        }
        let env_lift = HermitianMatrix::identity(d_s).kron(env.matrix());
        Ok(Self { env, d_s, segments, env_lift })
    }

    /// Single constant segment on `[0, tau]`.
    pub fn time_independent(
        h_env: HermitianMatrix,
        h_sys: HermitianMatrix,
        h_int: HermitianMatrix,
        tau: f64,
    ) -> Result<Self> {
        Self::new(h_env, vec![Segment::constant(0.0, tau, h_sys, h_int)])
    }

    pub fn env(&self) -> &EnvHamiltonian {
        &self.env
    }

    pub fn d_s(&self) -> usize {
        self.d_s
    }

    pub fn d_e(&self) -> usize {
        self.env.dim()
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn duration(&self) -> f64 {
        self.segments.last().unwrap().t_end
    }

    /// `I (x) H_E`.
    pub fn env_lift(&self) -> &HermitianMatrix {
        &self.env_lift
    }

    /// Total Hamiltonian of segment `idx` at time `t`.
    pub fn total_in_segment(&self, idx: usize, t: f64) -> HermitianMatrix {
        let seg = &self.segments[idx];
        let sys = seg.sys_at(t).kron(&HermitianMatrix::identity(self.d_e()));
        sys.add(&self.env_lift).and_then(|h| h.add(&seg.int_at(t))).expect("validated dimensions")
    }

    /// Right-continuous total Hamiltonian; the last segment is closed at `tau`.
    pub fn total_at(&self, t: f64) -> HermitianMatrix {
        let idx = self.segments.iter().position(|s| t < s.t_end).unwrap_or(self.segments.len() - 1);
        self.total_in_segment(idx, t)
    }

    /// `1 / max(1, spectral spread of H(t))` sampled at segment starts and ends.
    pub fn timescale(&self) -> f64 {
        let mut spread: f64 = 1.0;
        for (i, s) in self.segments.iter().enumerate() {
            for t in [s.t_start, s.t_end] {
                let ev = self.total_in_segment(i, t).eigenvalues();
                spread = spread.max(ev[ev.len() - 1] - ev[0]);
            }
        }
        1.0 / spread
    }
}

/// `d/dt tr[rho_E H_E] = tr[-i [H, rho] (I (x) H_E)]`.
///
/// The heat flux is the negative of this value.
pub fn env_energy_rate(rho: &BipartiteState, h_total: &HermitianMatrix, h_env: &HermitianMatrix) -> Result<f64> {
    if h_total.dim() != rho.dim() || h_env.dim() != rho.d_e() {
        return Err(Error::InvalidInput(format!(
            "H has dimension {}, H_E has {}, state is {} x {}",
            h_total.dim(),
            h_env.dim(),
            rho.d_s(),
            rho.d_e()
        )));
    }
    let lift = HermitianMatrix::identity(rho.d_s()).kron(h_env);
    Ok(rate_with_commutator(rho, &commutator(&lift, h_total)))
}

/// `[K, H]` for `K = I (x) H_E`.
fn commutator(lift: &HermitianMatrix, h: &HermitianMatrix) -> CMatrix {
    let (k, h) = (lift.as_matrix(), h.as_matrix());
    k * h - h * k
}

/// `Re(-i tr[rho [K, H]])`.
fn rate_with_commutator(rho: &BipartiteState, comm: &CMatrix) -> f64 {
    let r = rho.state().as_matrix();
    let n = r.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += r[(i, j)] * comm[(j, i)];
        }
    }
    (C64::new(0.0, -1.0) * acc).re
}

/// Evolved states on the substep grid with cached thermodynamic observables.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<BipartiteState>,
    /// `tr[rho_E(t) H_E]`.
    pub env_energy: Vec<f64>,
    pub beta_star: Vec<ExtReal>,
    /// `dQ/dt = -d/dt tr[rho_E H_E]`, right limit (left limit at `tau`).
    pub heat_flux: Vec<f64>,
    rate_left: Vec<f64>,
    rate_right: Vec<f64>,
    schedule: HamiltonianSchedule,
    propagator: UnitaryMatrix,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn initial(&self) -> &BipartiteState {
        &self.states[0]
    }

    pub fn last(&self) -> &BipartiteState {
        self.states.last().unwrap()
    }

    pub fn schedule(&self) -> &HamiltonianSchedule {
        &self.schedule
    }

    pub fn env(&self) -> &EnvHamiltonian {
        self.schedule.env()
    }

    /// Composed propagator `U_tau`.
    pub fn propagator(&self) -> &UnitaryMatrix {
        &self.propagator
    }

    /// Environment energy rate approaching grid point `k` from the left.
    pub fn env_energy_rate_left(&self, k: usize) -> f64 {
        self.rate_left[k]
    }

    /// Environment energy rate leaving grid point `k` to the right.
    pub fn env_energy_rate_right(&self, k: usize) -> f64 {
        self.rate_right[k]
    }

    pub fn system_entropy(&self, k: usize) -> f64 {
        thermo::von_neumann_entropy(&self.states[k].system())
    }

    pub fn joint_entropy(&self, k: usize) -> f64 {
        thermo::von_neumann_entropy(self.states[k].state())
    }

    pub fn mutual_information(&self, k: usize) -> f64 {
        thermo::mutual_information(&self.states[k])
    }

    /// Columns `t, env_energy, beta_star, heat_flux, S_system, mutual_information`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,env_energy,beta_star,heat_flux,S_system,mutual_information")?;
        for k in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.times[k],
                self.env_energy[k],
                self.beta_star[k],
                self.heat_flux[k],
                self.system_entropy(k),
                self.mutual_information(k)
            )?;
        }
        Ok(())
    }
}

/// [`evolve_with`] using the default `beta*` solver settings.
pub fn evolve(initial: &BipartiteState, sched: &HamiltonianSchedule, steps_per_segment: usize) -> Result<Trajectory> {
    evolve_with(initial, sched, steps_per_segment, &BetaSolveConfig::default())
}

pub fn evolve_with(
    initial: &BipartiteState,
    sched: &HamiltonianSchedule,
    steps_per_segment: usize,
    cfg: &BetaSolveConfig,
) -> Result<Trajectory> {
    if steps_per_segment == 0 {
        return Err(Error::InvalidInput("steps_per_segment must be at least 1".into()));
    }
    if initial.d_s() != sched.d_s() || initial.d_e() != sched.d_e() {
        return Err(Error::InvalidInput(format!(
            "initial state is {} x {} but schedule is {} x {}",
            initial.d_s(),
            initial.d_e(),
            sched.d_s(),
            sched.d_e()
        )));
    }
    let env = sched.env();
    let capacity = sched.segments().len() * steps_per_segment + 1;
    let mut traj = Trajectory {
        times: Vec::with_capacity(capacity),
        states: Vec::with_capacity(capacity),
        env_energy: Vec::with_capacity(capacity),
        beta_star: Vec::with_capacity(capacity),
        heat_flux: Vec::with_capacity(capacity),
        rate_left: Vec::with_capacity(capacity),
        rate_right: Vec::with_capacity(capacity),
        schedule: sched.clone(),
        propagator: UnitaryMatrix::identity(initial.dim()),
    };

    let push_point = |traj: &mut Trajectory, t: f64, state: BipartiteState| -> Result<()> {
        let rho_e = state.environment();
        let q = env.level_occupations(&rho_e)?;
        let energy: f64 = q.iter().zip(env.levels()).map(|(p, e)| p * e).sum();
        traj.beta_star.push(env.effective_beta_from_occupations(&q, cfg)?);
        traj.env_energy.push(energy);
        traj.times.push(t);
        traj.states.push(state);
        Ok(())
    };
    push_point(&mut traj, 0.0, initial.clone())?;

    let lift = sched.env_lift();
    for (idx, seg) in sched.segments().iter().enumerate() {
        let dt = (seg.t_end - seg.t_start) / steps_per_segment as f64;
        let constant_step = seg
            .is_time_independent()
            .then(|| linalg::unitary_step(&sched.total_in_segment(idx, seg.t_start), dt))
            .transpose()?;
        let comm_at = |t: f64| commutator(lift, &sched.total_in_segment(idx, t));
        let constant_comm = seg.is_time_independent().then(|| comm_at(seg.t_start));
        let rate_at = |state: &BipartiteState, t: f64| match &constant_comm {
            Some(c) => rate_with_commutator(state, c),
            None => rate_with_commutator(state, &comm_at(t)),
        };

        let start = traj.states.last().unwrap().clone();
        let r0 = rate_at(&start, seg.t_start);
        if idx == 0 {
            traj.rate_left.push(r0);
        }
        traj.rate_right.push(r0);
        for j in 0..steps_per_segment {
            let t = seg.t_start + j as f64 * dt;
            let u = match &constant_step {
                Some(u) => u.clone(),
                None => linalg::unitary_step(&sched.total_in_segment(idx, t + 0.5 * dt), dt)?,
            };
            let t_next = if j + 1 == steps_per_segment { seg.t_end } else { seg.t_start + (j + 1) as f64 * dt };
            let next = traj.states.last().unwrap().evolve(&u)?;
            traj.propagator = u.then_after(&traj.propagator);
            let r = rate_at(&next, t_next);
            traj.rate_left.push(r);
            if j + 1 < steps_per_segment {
                traj.rate_right.push(r);
            }
            push_point(&mut traj, t_next, next)?;
        }
    }
    let last = *traj.rate_left.last().unwrap();
    traj.rate_right.push(last);
    traj.heat_flux = traj.rate_right.iter().map(|r| -r).collect();
    debug_assert_eq!(traj.rate_left.len(), traj.len());
    debug_assert_eq!(traj.rate_right.len(), traj.len());
    Ok(traj)
}
