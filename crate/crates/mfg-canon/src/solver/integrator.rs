//! Classical fourth-order one-step integration of the characteristics
//! system on a uniform grid.
//!
//! Orientation: with the backward terminal-value convention the
//! characteristics run `dx/dt = -grad_p H`, `dp/dt = +grad_x H`,
//! `p(T) = grad_x G`. The sign is isolated in [`FLOW_SIGN`]; the
//! linear-quadratic closed form pins it down (see the solver tests).

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::models::Hamiltonian;

use super::Trajectories;

/// `dx/dt = FLOW_SIGN * grad_p H`, `dp/dt = -FLOW_SIGN * grad_x H`.
pub const FLOW_SIGN: f64 = -1.0;

type AgentStates = Vec<DVector<f64>>;

fn flow(
    h: &dyn Hamiltonian,
    xs: &[DVector<f64>],
    ps: &[DVector<f64>],
    mu: &EmpiricalMeasure,
) -> (AgentStates, AgentStates) {
    let dx = xs
        .iter()
        .zip(ps)
        .map(|(x, p)| h.grad_p(x, mu, p) * FLOW_SIGN)
        .collect();
    let dp = xs
        .iter()
        .zip(ps)
        .map(|(x, p)| h.grad_x(x, mu, p) * (-FLOW_SIGN))
        .collect();
    (dx, dp)
}

fn all_finite(vs: &[DVector<f64>]) -> bool {
    vs.iter().all(|v| v.iter().all(|c| c.is_finite()))
}

fn advanced(base: &[DVector<f64>], dir: &[DVector<f64>], h: f64) -> AgentStates {
    base.iter().zip(dir).map(|(b, d)| b + d * h).collect()
}

/// A provider of the measure each RK stage sees.
trait StageMeasure {
    fn measure(&self, stage_states: &[DVector<f64>], stage_time: f64) -> Result<EmpiricalMeasure>;
}

/// Self-consistent coupling: every stage forms the measure from the same
/// stage states of all agents (synchronous update, preserving particle
/// exchange symmetry).
struct SelfConsistent;

impl StageMeasure for SelfConsistent {
    fn measure(&self, stage_states: &[DVector<f64>], _stage_time: f64) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::new(stage_states.to_vec())
    }
}

/// Frozen measure path, interpolated linearly between stored snapshots.
pub struct MeasurePath {
    times: Vec<f64>,
    snapshots: Vec<EmpiricalMeasure>,
}

impl MeasurePath {
    pub fn new(times: Vec<f64>, snapshots: Vec<EmpiricalMeasure>) -> Result<Self> {
        if times.len() != snapshots.len() || times.len() < 2 {
            return Err(Error::invalid("measure path needs matching times and snapshots"));
        }
        Ok(Self { times, snapshots })
    }

    pub fn constant(mu: &EmpiricalMeasure, times: &[f64]) -> Self {
        Self { times: times.to_vec(), snapshots: vec![mu.clone(); times.len()] }
    }

    /// Snapshot list indexed by grid node.
    pub fn from_trajectories(traj: &Trajectories) -> Result<Self> {
        let mut snapshots = Vec::with_capacity(traj.times.len());
        for k in 0..traj.times.len() {
            let points: Vec<DVector<f64>> =
                traj.states.iter().map(|agent| agent[k].clone()).collect();
            snapshots.push(EmpiricalMeasure::new(points)?);
        }
        Self::new(traj.times.clone(), snapshots)
    }

    pub fn terminal(&self) -> &EmpiricalMeasure {
        self.snapshots.last().expect("non-empty path")
    }

    /// Pointwise-linear interpolation of the particle positions at `t`;
    /// clamps outside the stored span.
    pub fn at(&self, t: f64) -> EmpiricalMeasure {
        let times = &self.times;
        if t <= times[0] {
            return self.snapshots[0].clone();
        }
        if t >= *times.last().unwrap() {
            return self.snapshots.last().unwrap().clone();
        }
        let k = times.partition_point(|&tk| tk < t).saturating_sub(1);
        let span = times[k + 1] - times[k];
        let w = if span > 0.0 { (t - times[k]) / span } else { 0.0 };
        if w == 0.0 {
            return self.snapshots[k].clone();
        }
        let a = &self.snapshots[k];
        let b = &self.snapshots[k + 1];
        let points = a
            .points()
            .iter()
            .zip(b.points())
            .map(|(pa, pb)| pa * (1.0 - w) + pb * w)
            .collect();
        EmpiricalMeasure::new(points).expect("interpolant of finite points is finite")
    }
}

struct Frozen<'a>(&'a MeasurePath);

impl StageMeasure for Frozen<'_> {
    fn measure(&self, _stage_states: &[DVector<f64>], stage_time: f64) -> Result<EmpiricalMeasure> {
        Ok(self.0.at(stage_time))
    }
}

fn rk4<M: StageMeasure>(
    h: &dyn Hamiltonian,
    x0: &[DVector<f64>],
    p0: &[DVector<f64>],
    t_start: f64,
    t_end: f64,
    steps: usize,
    stage_measure: &M,
) -> Result<Trajectories> {
    if steps == 0 {
        return Err(Error::invalid("integration needs at least one step"));
    }
    if x0.len() != p0.len() || x0.is_empty() {
        return Err(Error::invalid("state and costate lists must match and be nonempty"));
    }
    if !(t_start.is_finite() && t_end.is_finite()) {
        return Err(Error::invalid("time span must be finite"));
    }
    if !(all_finite(x0) && all_finite(p0)) {
        return Err(Error::invalid("initial state must be finite"));
    }
    let n = x0.len();
    let dt = (t_end - t_start) / steps as f64;

    let mut times = Vec::with_capacity(steps + 1);
    let mut states: Vec<AgentStates> = vec![Vec::with_capacity(steps + 1); n];
    let mut costates: Vec<AgentStates> = vec![Vec::with_capacity(steps + 1); n];

    let mut xs: AgentStates = x0.to_vec();
    let mut ps: AgentStates = p0.to_vec();
    let record = |xs: &AgentStates,
                  ps: &AgentStates,
                  states: &mut Vec<AgentStates>,
                  costates: &mut Vec<AgentStates>| {
        for i in 0..n {
            states[i].push(xs[i].clone());
            costates[i].push(ps[i].clone());
        }
    };
    times.push(t_start);
    record(&xs, &ps, &mut states, &mut costates);

    for k in 0..steps {
        let t = t_start + k as f64 * dt;
        let blow_up = |what: &str| {
            Error::numerical(format!(
                "{what} while integrating; last finite time t = {t}"
            ))
        };

        let stage = |xs_s: &AgentStates, ps_s: &AgentStates, ts: f64| -> Result<(AgentStates, AgentStates)> {
            if !(all_finite(xs_s) && all_finite(ps_s)) {
                return Err(blow_up("non-finite stage state"));
            }
            let mu = stage_measure
                .measure(xs_s, ts)
                .map_err(|_| blow_up("non-finite stage measure"))?;
            Ok(flow(h, xs_s, ps_s, &mu))
        };

        let (kx1, kp1) = stage(&xs, &ps, t)?;
        let (kx2, kp2) = stage(&advanced(&xs, &kx1, dt / 2.0), &advanced(&ps, &kp1, dt / 2.0), t + dt / 2.0)?;
        let (kx3, kp3) = stage(&advanced(&xs, &kx2, dt / 2.0), &advanced(&ps, &kp2, dt / 2.0), t + dt / 2.0)?;
        let (kx4, kp4) = stage(&advanced(&xs, &kx3, dt), &advanced(&ps, &kp3, dt), t + dt)?;

        for i in 0..n {
            xs[i] += (&kx1[i] + &kx2[i] * 2.0 + &kx3[i] * 2.0 + &kx4[i]) * (dt / 6.0);
            ps[i] += (&kp1[i] + &kp2[i] * 2.0 + &kp3[i] * 2.0 + &kp4[i]) * (dt / 6.0);
        }
        if !(all_finite(&xs) && all_finite(&ps)) {
            return Err(blow_up("non-finite state"));
        }
        times.push(t_start + (k + 1) as f64 * dt);
        record(&xs, &ps, &mut states, &mut costates);
    }
    // Land exactly on the endpoint regardless of rounding in the loop.
    *times.last_mut().unwrap() = t_end;

    Ok(Trajectories { times, states, costates })
}

/// Integrate the self-consistent coupled system for all agents from
/// `t_start` to `t_end` (either direction).
pub fn integrate_characteristics(
    h: &dyn Hamiltonian,
    x0: &[DVector<f64>],
    p0: &[DVector<f64>],
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<Trajectories> {
    rk4(h, x0, p0, t_start, t_end, steps, &SelfConsistent)
}

/// Integrate one agent against a frozen measure path.
pub fn integrate_single_frozen(
    h: &dyn Hamiltonian,
    x0: &DVector<f64>,
    p0: &DVector<f64>,
    path: &MeasurePath,
    t_start: f64,
    t_end: f64,
    steps: usize,
) -> Result<Trajectories> {
    rk4(
        h,
        std::slice::from_ref(x0),
        std::slice::from_ref(p0),
        t_start,
        t_end,
        steps,
        &Frozen(path),
    )
}
