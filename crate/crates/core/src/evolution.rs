//! Time integration of the block system
//! `d/dt (M0 U) + (M1 + A) U + M2 V = f`, `dV/dt = U`,
//! where `V` is the running antiderivative of the state.
//!
//! Both schemes solve one shifted system per step. The implicit midpoint
//! rule conserves the discrete energy
//! `E = (1/2)<U, M0 U> + (1/2)<V, M2 V>` exactly for `f = 0`; implicit Euler
//! dissipates it. A right-hand side that is exactly zero produces an exactly
//! zero step, so quiescent states stay bitwise zero until the forcing onset.

use serde::{Deserialize, Serialize};

use crate::blocks::BlockOperator;
use crate::grid::Grid;
use crate::material::{BlockDesc, Validity};
use crate::solver::{self, NodePreconditioner, ShiftedSystem};
use crate::{Error, Result};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Midpoint,
    ImplicitEuler,
}

/// The four grid-level operator blocks of one evolutionary model.
pub struct System<'a> {
    pub m0: &'a BlockOperator,
    pub m1: &'a BlockOperator,
    pub m2: &'a BlockOperator,
    pub a: &'a BlockOperator,
}

impl<'a> System<'a> {
    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Quadratic energy split into its mass and antiderivative parts.
pub fn energy(sys: &System, u: &[f64], v: &[f64]) -> (f64, f64, f64) {
    let e_m0 = 0.5 * sys.m0.inner(u, u);
    let e_m2 = if sys.m2.is_zero() { 0.0 } else { 0.5 * sys.m2.inner(v, v) };
    (e_m0 + e_m2, e_m0, e_m2)
}

/// One-step integrator for a fixed scheme and step size; owns the
/// preconditioner and scratch buffers.
pub struct Stepper {
    pub scheme: Scheme,
    pub dt: f64,
    pub tol: f64,
    c1: f64,
    c2: f64,
    pre: NodePreconditioner,
    rhs: Vec<f64>,
    f_buf: Vec<f64>,
}

impl Stepper {
    pub fn new(sys: &System, nodes: usize, scheme: Scheme, dt: f64, tol: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Config("time step must be positive".into()));
        }
        let (c1, c2) = match scheme {
            Scheme::Midpoint => (dt / 2.0, dt * dt / 4.0),
            Scheme::ImplicitEuler => (dt, dt * dt),
        };
        let mut node = solver::node_matrix(sys.m0, nodes)?;
        node += solver::node_matrix(sys.m1, nodes)? * c1;
        node += solver::node_matrix(sys.a, nodes)? * c1;
        node += solver::node_matrix(sys.m2, nodes)? * c2;
        let pre = NodePreconditioner::new(node, sys.m0, nodes)?;
        let n = sys.dim();
        Ok(Stepper { scheme, dt, tol, c1, c2, pre, rhs: vec![0.0; n], f_buf: vec![0.0; n] })
    }

    /// Advances `(u, v)` from time `t` to `t + dt` in place.
    pub fn step(
        &mut self,
        sys: &System,
        u: &mut [f64],
        v: &mut [f64],
        t: f64,
        forcing: &mut dyn FnMut(f64, &mut [f64]),
    ) -> Result<()> {
        let dt = self.dt;
        let rhs = &mut self.rhs;
        rhs.fill(0.0);
        match self.scheme {
            Scheme::Midpoint => {
                forcing(t + 0.5 * dt, &mut self.f_buf);
                sys.m0.matvec_acc(1.0, u, rhs);
                sys.m1.matvec_acc(-self.c1, u, rhs);
                sys.a.matvec_acc(-self.c1, u, rhs);
                sys.m2.matvec_acc(-self.c2, u, rhs);
                sys.m2.matvec_acc(-dt, v, rhs);
                for (r, f) in rhs.iter_mut().zip(&self.f_buf) {
                    *r += dt * f;
                }
            }
            Scheme::ImplicitEuler => {
                forcing(t + dt, &mut self.f_buf);
                sys.m0.matvec_acc(1.0, u, rhs);
                sys.m2.matvec_acc(-dt, v, rhs);
                for (r, f) in rhs.iter_mut().zip(&self.f_buf) {
                    *r += dt * f;
                }
            }
        }
        let op = ShiftedSystem { m0: sys.m0, m1: sys.m1, m2: sys.m2, a: sys.a, c1: self.c1, c2: self.c2 };
        let u_next = solver::solve(&op, &self.pre, rhs, self.tol)?;
        match self.scheme {
            Scheme::Midpoint => {
                for i in 0..u.len() {
                    let ubar = 0.5 * (u[i] + u_next[i]);
                    v[i] += dt * ubar;
                    u[i] = u_next[i];
                }
            }
            Scheme::ImplicitEuler => {
                for i in 0..u.len() {
                    v[i] += dt * u_next[i];
                    u[i] = u_next[i];
                }
            }
        }
        Ok(())
    }
}

/// Data available to observers after each completed step.
pub struct StepRecord<'a> {
    /// Completed step count (the state is at `t0 + step * dt`).
    pub step: usize,
    /// Time after the step.
    pub t: f64,
    pub u: &'a [f64],
    pub v: &'a [f64],
    pub u_prev: &'a [f64],
    /// Forcing sampled at the step's start time.
    pub f_prev: &'a [f64],
    /// Forcing sampled at the step's end time.
    pub f_now: &'a [f64],
}

pub trait Observer {
    fn begin(&mut self, _t0: f64, _u0: &[f64], _v0: &[f64], _sys: &System) {}
    fn observe(&mut self, rec: &StepRecord<'_>, sys: &System);
}

/// Runs `steps` steps from `(u0, v0)` at `t0`, feeding every observer, and
/// returns the final `(u, v)`.
#[allow(clippy::too_many_arguments)]
pub fn run_with(
    sys: &System,
    nodes: usize,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    t0: f64,
    u0: Vec<f64>,
    v0: Vec<f64>,
    tol: f64,
    forcing: &mut dyn FnMut(f64, &mut [f64]),
    observers: &mut [&mut dyn Observer],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sys.dim();
    if u0.len() != n || v0.len() != n {
        return Err(Error::Shape(format!(
            "initial state length {} does not match system dimension {}",
            u0.len(),
            n
        )));
    }
    let mut u = u0;
    let mut v = v0;
    let mut u_prev = vec![0.0; n];
    let mut f_prev = vec![0.0; n];
    let mut f_now = vec![0.0; n];
    let mut stepper = Stepper::new(sys, nodes, scheme, dt, tol)?;
    for obs in observers.iter_mut() {
        obs.begin(t0, &u, &v, sys);
    }
    forcing(t0, &mut f_prev);
    for k in 0..steps {
        let t_k = t0 + k as f64 * dt;
        let t_next = t0 + (k + 1) as f64 * dt;
        u_prev.copy_from_slice(&u);
        stepper.step(sys, &mut u, &mut v, t_k, forcing)?;
        forcing(t_next, &mut f_now);
        let rec = StepRecord {
            step: k + 1,
            t: t_next,
            u: &u,
            v: &v,
            u_prev: &u_prev,
            f_prev: &f_prev,
            f_now: &f_now,
        };
        for obs in observers.iter_mut() {
            obs.observe(&rec, sys);
        }
        std::mem::swap(&mut f_prev, &mut f_now);
    }
    Ok((u, v))
}

/// A stored trajectory: states, running antiderivatives, and the forcing
/// sampled at the grid times. Memory scales with `steps * dim`; intended for
/// desk-scale studies (stream with observers otherwise).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub scheme: Scheme,
    pub dt: f64,
    pub t0: f64,
    pub states: Vec<Vec<f64>>,
    pub auxiliaries: Vec<Vec<f64>>,
    pub forcings: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }
}

struct Collector {
    states: Vec<Vec<f64>>,
    auxiliaries: Vec<Vec<f64>>,
    forcings: Vec<Vec<f64>>,
}

impl Observer for Collector {
    fn begin(&mut self, _t0: f64, u0: &[f64], v0: &[f64], _sys: &System) {
        self.states.push(u0.to_vec());
        self.auxiliaries.push(v0.to_vec());
    }
    fn observe(&mut self, rec: &StepRecord<'_>, _sys: &System) {
        if self.forcings.is_empty() {
            self.forcings.push(rec.f_prev.to_vec());
        }
        self.forcings.push(rec.f_now.to_vec());
        self.states.push(rec.u.to_vec());
        self.auxiliaries.push(rec.v.to_vec());
    }
}

/// Integrates from rest and stores the whole trajectory.
pub fn run(
    sys: &System,
    nodes: usize,
    scheme: Scheme,
    dt: f64,
    steps: usize,
    tol: f64,
    forcing: &mut dyn FnMut(f64, &mut [f64]),
) -> Result<Trajectory> {
    let n = sys.dim();
    let mut col = Collector { states: Vec::new(), auxiliaries: Vec::new(), forcings: Vec::new() };
    run_with(
        sys,
        nodes,
        scheme,
        dt,
        steps,
        0.0,
        vec![0.0; n],
        vec![0.0; n],
        tol,
        forcing,
        &mut [&mut col],
    )?;
    if col.forcings.is_empty() {
        let mut f0 = vec![0.0; n];
        forcing(0.0, &mut f0);
        col.forcings.push(f0);
    }
    Ok(Trajectory {
        scheme,
        dt,
        t0: 0.0,
        states: col.states,
        auxiliaries: col.auxiliaries,
        forcings: col.forcings,
    })
}

/// Work increment of one step under the scheme's quadrature: the trapezoid
/// average of the forcing against the state average for the midpoint rule,
/// the right endpoint against the new state for implicit Euler.
pub fn work_increment(scheme: Scheme, dt: f64, rec: &StepRecord<'_>) -> f64 {
    match scheme {
        Scheme::Midpoint => {
            let mut s = 0.0;
            for i in 0..rec.u.len() {
                let ubar = 0.5 * (rec.u[i] + rec.u_prev[i]);
                let fbar = 0.5 * (rec.f_prev[i] + rec.f_now[i]);
                s += ubar * fbar;
            }
            dt * s
        }
        Scheme::ImplicitEuler => dt * dot(rec.u, rec.f_now),
    }
}

/// One row of the energy log.
#[derive(Debug, Clone, Copy)]
pub struct EnergyRow {
    pub t: f64,
    pub e_total: f64,
    pub e_m0: f64,
    pub e_m2: f64,
    pub work_integral: f64,
    pub residual: f64,
}

/// Streams the energy balance: cumulative work and the defect
/// `|E(t) - E(t0) - W(t0, t)|` per step.
pub struct EnergyTracker {
    pub scheme: Scheme,
    pub dt: f64,
    pub rows: Vec<EnergyRow>,
    work: f64,
    e_ref: f64,
}

impl EnergyTracker {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        EnergyTracker { scheme, dt, rows: Vec::new(), work: 0.0, e_ref: 0.0 }
    }

    pub fn final_residual(&self) -> f64 {
        self.rows.last().map(|r| r.residual).unwrap_or(0.0)
    }
}

impl Observer for EnergyTracker {
    fn begin(&mut self, t0: f64, u0: &[f64], v0: &[f64], sys: &System) {
        let (e, e0, e2) = energy(sys, u0, v0);
        self.e_ref = e;
        self.work = 0.0;
        self.rows.push(EnergyRow {
            t: t0,
            e_total: e,
            e_m0: e0,
            e_m2: e2,
            work_integral: 0.0,
            residual: 0.0,
        });
    }

    fn observe(&mut self, rec: &StepRecord<'_>, sys: &System) {
        self.work += work_increment(self.scheme, self.dt, rec);
        let (e, e0, e2) = energy(sys, rec.u, rec.v);
        self.rows.push(EnergyRow {
            t: rec.t,
            e_total: e,
            e_m0: e0,
            e_m2: e2,
            work_integral: self.work,
            residual: (e - self.e_ref - self.work).abs(),
        });
    }
}

/// Records the largest state entry seen strictly before the onset time and
/// whether everything there was bitwise zero.
pub struct CausalityTracker {
    pub onset: f64,
    pub pre_onset_max_abs: f64,
    pub exactly_zero: bool,
}

impl CausalityTracker {
    pub fn new(onset: f64) -> Self {
        CausalityTracker { onset, pre_onset_max_abs: 0.0, exactly_zero: true }
    }
}

impl Observer for CausalityTracker {
    fn begin(&mut self, t0: f64, u0: &[f64], _v0: &[f64], _sys: &System) {
        if t0 < self.onset {
            for x in u0 {
                self.pre_onset_max_abs = self.pre_onset_max_abs.max(x.abs());
            }
            self.exactly_zero &= u0.iter().all(|x| *x == 0.0);
        }
    }
    fn observe(&mut self, rec: &StepRecord<'_>, _sys: &System) {
        if rec.t < self.onset {
            for x in rec.u {
                self.pre_onset_max_abs = self.pre_onset_max_abs.max(x.abs());
            }
            self.exactly_zero &= rec.u.iter().all(|x| *x == 0.0);
        }
    }
}

/// Energy-balance defect over the step range `[ka, kb]` of a stored
/// trajectory, using the scheme's work quadrature.
pub fn energy_balance_residual(
    sys: &System,
    traj: &Trajectory,
    ka: usize,
    kb: usize,
) -> Result<f64> {
    if kb <= ka || kb > traj.steps() {
        return Err(Error::Config(format!(
            "balance range [{ka}, {kb}] out of bounds for {} steps",
            traj.steps()
        )));
    }
    let (ea, _, _) = energy(sys, &traj.states[ka], &traj.auxiliaries[ka]);
    let (eb, _, _) = energy(sys, &traj.states[kb], &traj.auxiliaries[kb]);
    let mut work = 0.0;
    for k in ka..kb {
        let rec = StepRecord {
            step: k + 1,
            t: traj.time(k + 1),
            u: &traj.states[k + 1],
            v: &traj.auxiliaries[k + 1],
            u_prev: &traj.states[k],
            f_prev: &traj.forcings[k],
            f_now: &traj.forcings[k + 1],
        };
        work += work_increment(traj.scheme, traj.dt, &rec);
    }
    Ok((eb - ea - work).abs())
}

/// Trapezoid quadrature of `exp(-2 rho t) x(t)^2` over a sampled series.
pub fn weighted_norm_series(ts: &[f64], xs: &[f64], rho: f64) -> f64 {
    assert_eq!(ts.len(), xs.len());
    let mut acc = 0.0;
    for k in 1..ts.len() {
        let w0 = (-2.0 * rho * ts[k - 1]).exp() * xs[k - 1] * xs[k - 1];
        let w1 = (-2.0 * rho * ts[k]).exp() * xs[k] * xs[k];
        acc += 0.5 * (ts[k] - ts[k - 1]) * (w0 + w1);
    }
    acc.sqrt()
}

/// Causal cumulative trapezoid antiderivative of a sampled series.
pub fn antiderivative_series(ts: &[f64], xs: &[f64]) -> Vec<f64> {
    assert_eq!(ts.len(), xs.len());
    let mut out = vec![0.0; xs.len()];
    for k in 1..ts.len() {
        out[k] = out[k - 1] + 0.5 * (ts[k] - ts[k - 1]) * (xs[k - 1] + xs[k]);
    }
    out
}

/// Exponentially weighted norm of a trajectory's state magnitude.
pub fn weighted_norm(traj: &Trajectory, rho: f64) -> f64 {
    let ts: Vec<f64> = (0..traj.states.len()).map(|k| traj.time(k)).collect();
    let xs: Vec<f64> = traj.states.iter().map(|u| dot(u, u).sqrt()).collect();
    weighted_norm_series(&ts, &xs, rho)
}

/// Componentwise causal antiderivative of a trajectory's states.
pub fn antiderivative(traj: &Trajectory) -> Trajectory {
    let n = traj.states.first().map(|u| u.len()).unwrap_or(0);
    let mut states = Vec::with_capacity(traj.states.len());
    let mut acc = vec![0.0; n];
    states.push(acc.clone());
    for k in 1..traj.states.len() {
        for i in 0..n {
            acc[i] += 0.5 * traj.dt * (traj.states[k - 1][i] + traj.states[k][i]);
        }
        states.push(acc.clone());
    }
    Trajectory {
        scheme: traj.scheme,
        dt: traj.dt,
        t0: traj.t0,
        states,
        auxiliaries: Vec::new(),
        forcings: Vec::new(),
    }
}

/// Conserved quantity of a two-block wave system (`M1 = M2 = 0`,
/// block-diagonal mass, zero forcing): the midpoint rule preserves
/// `(1/2)|dU0/dt|_{M00}^2 + (1/2)|G Ubar0|_{C}^2` across steps, where `G` is
/// the differential block mapping the first state block into the second and
/// `C` the inverse of the second mass block.
pub fn two_block_invariant(
    m00: &BlockOperator,
    stiffness: &BlockOperator,
    g: &BlockOperator,
    u0_prev: &[f64],
    u0_next: &[f64],
    dt: f64,
) -> f64 {
    let n = u0_prev.len();
    let du: Vec<f64> = (0..n).map(|i| (u0_next[i] - u0_prev[i]) / dt).collect();
    let ubar: Vec<f64> = (0..n).map(|i| 0.5 * (u0_next[i] + u0_prev[i])).collect();
    let mut gu = vec![0.0; g.nrows()];
    g.matvec_acc(1.0, &ubar, &mut gu);
    0.5 * m00.inner(&du, &du) + 0.5 * stiffness.inner(&gu, &gu)
}

/// Forcing description: a time profile applied to the first component of
/// one layout block, with a smooth fixed spatial envelope. All profiles are
/// exactly zero strictly before the onset time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "kind")]
pub enum ForcingSpec {
    Zero,
    Constant {
        target: String,
        amplitude: f64,
        #[serde(default)]
        onset: f64,
    },
    GaussianPulse {
        target: String,
        amplitude: f64,
        #[serde(default)]
        onset: f64,
        center: f64,
        width: f64,
    },
}

impl ForcingSpec {
    pub fn onset(&self) -> f64 {
        match self {
            ForcingSpec::Zero => f64::INFINITY,
            ForcingSpec::Constant { onset, .. } => *onset,
            ForcingSpec::GaussianPulse { onset, .. } => *onset,
        }
    }

    pub fn target(&self) -> Option<&str> {
        match self {
            ForcingSpec::Zero => None,
            ForcingSpec::Constant { target, .. } => Some(target),
            ForcingSpec::GaussianPulse { target, .. } => Some(target),
        }
    }
}

enum TimeProfile {
    Zero,
    Constant { amplitude: f64, onset: f64 },
    Gaussian { amplitude: f64, onset: f64, center: f64, width: f64 },
}

/// Forcing bound to a concrete layout and grid: a sparse spatial profile
/// scaled by a scalar time factor.
pub struct CompiledForcing {
    profile: Vec<(usize, f64)>,
    time: TimeProfile,
    dim: usize,
}

impl CompiledForcing {
    pub fn compile(spec: &ForcingSpec, layout: &[BlockDesc], grid: &Grid) -> Result<Self> {
        let dims: Vec<usize> = layout.iter().map(|b| b.dim() * grid.nodes()).collect();
        let dim: usize = dims.iter().sum();
        let time = match spec {
            ForcingSpec::Zero => TimeProfile::Zero,
            ForcingSpec::Constant { amplitude, onset, .. } => {
                TimeProfile::Constant { amplitude: *amplitude, onset: *onset }
            }
            ForcingSpec::GaussianPulse { amplitude, onset, center, width, .. } => {
                if !(*width > 0.0) {
                    return Err(Error::Config("pulse width must be positive".into()));
                }
                TimeProfile::Gaussian {
                    amplitude: *amplitude,
                    onset: *onset,
                    center: *center,
                    width: *width,
                }
            }
        };
        let mut profile = Vec::new();
        if let Some(target) = spec.target() {
            let idx = layout.iter().position(|b| b.label == target).ok_or_else(|| {
                Error::Config(format!(
                    "forcing target '{}' is not a state block (available: {})",
                    target,
                    layout.iter().map(|b| b.label.as_str()).collect::<Vec<_>>().join(", ")
                ))
            })?;
            let offset: usize = dims[..idx].iter().sum();
            let bdim = layout[idx].dim();
            let l = grid.extent();
            let mid = 0.5 * l;
            let s = 0.15 * l;
            for node in 0..grid.nodes() {
                let p = grid.position(node);
                let r2 = (p[0] - mid).powi(2) + (p[1] - mid).powi(2) + (p[2] - mid).powi(2);
                let w = (-0.5 * r2 / (s * s)).exp();
                profile.push((offset + node * bdim, w));
            }
        }
        Ok(CompiledForcing { profile, time, dim })
    }

    pub fn zero(dim: usize) -> Self {
        CompiledForcing { profile: Vec::new(), time: TimeProfile::Zero, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn time_factor(&self, t: f64) -> f64 {
        match &self.time {
            TimeProfile::Zero => 0.0,
            TimeProfile::Constant { amplitude, onset } => {
                if t < *onset {
                    0.0
                } else {
                    *amplitude
                }
            }
            TimeProfile::Gaussian { amplitude, onset, center, width } => {
                if t < *onset {
                    0.0
                } else {
                    let z = (t - center) / width;
                    amplitude * (-0.5 * z * z).exp()
                }
            }
        }
    }

    /// Writes `f(t)` into `out` (overwriting it).
    pub fn fill(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        let c = self.time_factor(t);
        if c == 0.0 {
            return;
        }
        for &(i, w) in &self.profile {
            out[i] = c * w;
        }
    }

    pub fn as_fn(&self) -> impl FnMut(f64, &mut [f64]) + '_ {
        move |t, out: &mut [f64]| self.fill(t, out)
    }
}

/// A ready-to-integrate problem: grid-level operators, layout, forcing, and
/// the validity verdict of the underlying law.
pub struct EvoProblem {
    pub layout: Vec<BlockDesc>,
    pub grid: Grid,
    pub m0: BlockOperator,
    pub m1: BlockOperator,
    pub m2: BlockOperator,
    pub a: BlockOperator,
    pub forcing: CompiledForcing,
    pub validity: Validity,
}

impl EvoProblem {
    pub fn system(&self) -> System<'_> {
        System { m0: &self.m0, m1: &self.m1, m2: &self.m2, a: &self.a }
    }

    pub fn dim(&self) -> usize {
        self.m0.nrows()
    }
}
