//! Deterministic N-particle forward-backward solver and the numerical
//! transformation-equivalence check.

pub mod integrator;
pub mod picard;
pub mod shooting;

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::inf_norm;
use crate::measures::EmpiricalMeasure;
use crate::models::{Hamiltonian, TerminalCost};
use crate::transform::{transform_cost, transform_hamiltonian, value_shift};

pub use integrator::{integrate_characteristics, integrate_single_frozen, MeasurePath, FLOW_SIGN};
pub use picard::PicardSolver;
pub use shooting::ShootingSolver;

/// Deterministic particle problem: data, initial cloud and grid.
pub struct MfgProblem {
    pub hamiltonian: Arc<dyn Hamiltonian>,
    pub cost: Arc<dyn TerminalCost>,
    pub initial_points: Vec<DVector<f64>>,
    pub horizon: f64,
    pub steps: usize,
    pub beta: f64,
    pub beta0: f64,
}

impl MfgProblem {
    pub fn new(
        hamiltonian: Arc<dyn Hamiltonian>,
        cost: Arc<dyn TerminalCost>,
        initial_points: Vec<DVector<f64>>,
        horizon: f64,
        steps: usize,
        beta: f64,
        beta0: f64,
    ) -> Result<Self> {
        if beta != 0.0 || beta0 != 0.0 {
            return Err(Error::invalid(
                "simulation is deterministic: beta and beta0 must both be 0",
            ));
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("horizon T must be positive"));
        }
        if steps < 2 {
            return Err(Error::invalid("steps must be at least 2"));
        }
        let d = hamiltonian.dim();
        if cost.dim() != d {
            return Err(Error::invalid("Hamiltonian and cost dimensions differ"));
        }
        if initial_points.is_empty() {
            return Err(Error::invalid("at least one initial point is required"));
        }
        if initial_points.iter().any(|x| x.len() != d || x.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid("initial points must be finite d-vectors"));
        }
        Ok(Self { hamiltonian, cost, initial_points, horizon, steps, beta, beta0 })
    }

    pub fn agents(&self) -> usize {
        self.initial_points.len()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn initial_measure(&self) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.initial_points.clone()).expect("validated at construction")
    }

    /// The same problem with momentum-shifted data `(H_a, G_a)`.
    pub fn transformed(&self, alpha: f64) -> Self {
        Self {
            hamiltonian: transform_hamiltonian(self.hamiltonian.clone(), alpha),
            cost: transform_cost(self.cost.clone(), alpha),
            initial_points: self.initial_points.clone(),
            horizon: self.horizon,
            steps: self.steps,
            beta: self.beta,
            beta0: self.beta0,
        }
    }
}

/// Time grid plus per-agent state and costate paths.
#[derive(Debug, Clone)]
pub struct Trajectories {
    pub times: Vec<f64>,
    /// `states[i][k]` is agent `i` at grid node `k`.
    pub states: Vec<Vec<DVector<f64>>>,
    pub costates: Vec<Vec<DVector<f64>>>,
}

impl Trajectories {
    pub fn agents(&self) -> usize {
        self.states.len()
    }

    pub fn measure_at(&self, k: usize) -> Result<EmpiricalMeasure> {
        EmpiricalMeasure::new(self.states.iter().map(|agent| agent[k].clone()).collect())
    }

    pub fn terminal_measure(&self) -> Result<EmpiricalMeasure> {
        self.measure_at(self.times.len() - 1)
    }

    /// Max absolute state deviation against another trajectory set.
    pub fn state_deviation(&self, other: &Trajectories) -> f64 {
        let mut dev: f64 = 0.0;
        for (a, b) in self.states.iter().zip(&other.states) {
            for (xa, xb) in a.iter().zip(b) {
                dev = dev.max(inf_norm(&(xa - xb)));
            }
        }
        dev
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 50, damping: 0.5 }
    }
}

/// Solver output: trajectories, per-agent initial values and diagnostics.
pub struct MfgSolution {
    pub trajectories: Trajectories,
    pub values_at_zero: Option<Vec<f64>>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: &'static str,
    pub fallback_used: bool,
    /// Per-iteration trajectory displacement (fixed-point methods only).
    pub displacement_history: Vec<f64>,
}

/// Terminal condition mismatch `max_i |p_i(T) - grad_x G(x_i(T), mu_T)|`.
pub fn terminal_residual(traj: &Trajectories, g: &dyn TerminalCost) -> Result<(DVector<f64>, f64)> {
    let mu_t = traj.terminal_measure()?;
    let last = traj.times.len() - 1;
    let n = traj.agents();
    let d = mu_t.dim();
    let mut stacked = DVector::zeros(n * d);
    for i in 0..n {
        let r = &traj.costates[i][last] - g.grad_x(&traj.states[i][last], &mu_t);
        for a in 0..d {
            stacked[i * d + a] = r[a];
        }
    }
    let norm = inf_norm(&stacked);
    if !norm.is_finite() {
        return Err(Error::numerical("non-finite terminal residual"));
    }
    Ok((stacked, norm))
}

/// Per-agent initial values reconstructed along the characteristics:
/// `V_i(0) = G(x_i(T), mu_T) - ∫ [H - p·grad_p H] dt`, composite Simpson on
/// the solver grid (trapezoid when the step count is odd).
pub fn values_at_zero(
    traj: &Trajectories,
    h: &dyn Hamiltonian,
    g: &dyn TerminalCost,
) -> Result<Vec<f64>> {
    let nodes = traj.times.len();
    let steps = nodes - 1;
    let n = traj.agents();
    let mu_t = traj.terminal_measure()?;
    let mut integrands = vec![vec![0.0; nodes]; n];
    for k in 0..nodes {
        let mu = traj.measure_at(k)?;
        for i in 0..n {
            let x = &traj.states[i][k];
            let p = &traj.costates[i][k];
            integrands[i][k] = h.value(x, &mu, p) - p.dot(&h.grad_p(x, &mu, p));
        }
    }
    let dt = (traj.times[nodes - 1] - traj.times[0]) / steps as f64;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let f = &integrands[i];
        let integral = if steps % 2 == 0 {
            let mut acc = f[0] + f[steps];
            for (k, fk) in f.iter().enumerate().take(steps).skip(1) {
                acc += if k % 2 == 1 { 4.0 * fk } else { 2.0 * fk };
            }
            acc * dt / 3.0
        } else {
            let mut acc = 0.5 * (f[0] + f[steps]);
            for fk in f.iter().take(steps).skip(1) {
                acc += fk;
            }
            acc * dt
        };
        let terminal = g.value(&traj.states[i][nodes - 1], &mu_t);
        let v = terminal - integral;
        if !v.is_finite() {
            return Err(Error::numerical("non-finite reconstructed value"));
        }
        out.push(v);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Solver strategies
// ---------------------------------------------------------------------------

/// A registered equilibrium solver, selected by name at runtime.
pub trait MfgSolverStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, problem: &MfgProblem, opts: &SolveOptions) -> Result<MfgSolution>;
}

pub fn solver_registry() -> Vec<Arc<dyn MfgSolverStrategy>> {
    vec![Arc::new(ShootingSolver), Arc::new(PicardSolver)]
}

pub fn solver_by_name(name: &str) -> Result<Arc<dyn MfgSolverStrategy>> {
    solver_registry()
        .into_iter()
        .find(|s| s.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = solver_registry().iter().map(|s| s.name()).collect();
            Error::invalid(format!("unknown solver '{name}' (known: {})", known.join(", ")))
        })
}

// ---------------------------------------------------------------------------
// Transformation equivalence
// ---------------------------------------------------------------------------

/// Deviations between a solved problem and its momentum-shifted counterpart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub alpha: f64,
    /// `max |x - x~|` over agents and grid nodes.
    pub trajectory_dev: f64,
    /// `max |p~ - (p + alpha x)|`.
    pub costate_dev: f64,
    /// `max |V~(0) - V(0) - shift(x(0))|`.
    pub value_dev: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Solve with `(H, G)` and `(H_a, G_a)` from identical initial points and
/// report the three identity deviations.
pub fn transform_equivalence(
    problem: &MfgProblem,
    alpha: f64,
    strategy: &dyn MfgSolverStrategy,
    opts: &SolveOptions,
    equiv_tol: f64,
) -> Result<EquivalenceReport> {
    let base = strategy.solve(problem, opts)?;
    if !base.converged {
        return Err(Error::numerical("equivalence check: base solve did not converge"));
    }
    let shifted_problem = problem.transformed(alpha);
    let shifted = strategy.solve(&shifted_problem, opts)?;
    if !shifted.converged {
        return Err(Error::numerical("equivalence check: transformed solve did not converge"));
    }

    let trajectory_dev = base.trajectories.state_deviation(&shifted.trajectories);

    let mut costate_dev: f64 = 0.0;
    for i in 0..base.trajectories.agents() {
        for k in 0..base.trajectories.times.len() {
            let expected = &base.trajectories.costates[i][k] + &base.trajectories.states[i][k] * alpha;
            costate_dev = costate_dev.max(inf_norm(&(&shifted.trajectories.costates[i][k] - expected)));
        }
    }

    let base_values = base
        .values_at_zero
        .ok_or_else(|| Error::numerical("equivalence check: base values missing"))?;
    let shifted_values = shifted
        .values_at_zero
        .ok_or_else(|| Error::numerical("equivalence check: transformed values missing"))?;
    let mut value_dev: f64 = 0.0;
    for i in 0..base_values.len() {
        let shift = value_shift(
            alpha,
            problem.beta,
            problem.beta0,
            problem.dim(),
            0.0,
            problem.horizon,
            &base.trajectories.states[i][0],
        )?;
        value_dev = value_dev.max((shifted_values[i] - base_values[i] - shift).abs());
    }

    let pass = trajectory_dev <= equiv_tol && costate_dev <= equiv_tol && value_dev <= equiv_tol;
    Ok(EquivalenceReport { alpha, trajectory_dev, costate_dev, value_dev, tolerance: equiv_tol, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtins::{
        ConcaveQuadraticCost, LqHamiltonian, MeanFieldLqHamiltonian, PxCoupledHamiltonian,
        QuadraticCost,
    };
    use crate::sampling::{rng_from_seed, Distribution, MeasureSampler};

    fn v1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    fn kinetic() -> Arc<dyn Hamiltonian> {
        Arc::new(LqHamiltonian::isotropic(1, 0.0, 0.0))
    }

    fn lq_problem(steps: usize) -> MfgProblem {
        MfgProblem::new(
            kinetic(),
            Arc::new(QuadraticCost::isotropic(1, 1.0)),
            vec![v1(1.0)],
            1.0,
            steps,
            0.0,
            0.0,
        )
        .unwrap()
    }

    fn mean_field_lq(steps: usize) -> MfgProblem {
        MfgProblem::new(
            kinetic(),
            Arc::new(QuadraticCost::new(1, 0.0, 0.0, 1.0).unwrap()),
            vec![v1(-1.0), v1(1.0)],
            1.0,
            steps,
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn problem_validation() {
        let h = kinetic();
        let g: Arc<dyn TerminalCost> = Arc::new(QuadraticCost::isotropic(1, 1.0));
        assert!(MfgProblem::new(h.clone(), g.clone(), vec![v1(0.0)], 1.0, 2, 0.1, 0.0).is_err());
        assert!(MfgProblem::new(h.clone(), g.clone(), vec![v1(0.0)], 0.0, 2, 0.0, 0.0).is_err());
        assert!(MfgProblem::new(h.clone(), g.clone(), vec![v1(0.0)], 1.0, 1, 0.0, 0.0).is_err());
        assert!(MfgProblem::new(h, g, vec![], 1.0, 2, 0.0, 0.0).is_err());
    }

    #[test]
    fn linear_flow_closed_form() {
        let traj =
            integrate_characteristics(kinetic().as_ref(), &[v1(1.0)], &[v1(0.5)], 0.0, 1.0, 100)
                .unwrap();
        let last = traj.times.len() - 1;
        assert!((traj.states[0][last][0] - 0.5).abs() < 1e-12);
        assert!((traj.costates[0][last][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_momentum_is_stationary() {
        let traj =
            integrate_characteristics(kinetic().as_ref(), &[v1(0.7)], &[v1(0.0)], 0.0, 2.0, 50)
                .unwrap();
        assert!(traj.states[0].iter().all(|x| x[0] == 0.7));
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let h: Arc<dyn Hamiltonian> = Arc::new(LqHamiltonian::isotropic(1, 1.0, 0.0));
        let traj =
            integrate_characteristics(h.as_ref(), &[v1(1.0)], &[v1(0.0)], 0.0, 1.0, 1000).unwrap();
        let last = traj.times.len() - 1;
        assert!((traj.states[0][last][0] - 1.0f64.cos()).abs() < 1e-6);
    }

    #[test]
    fn integrator_is_fourth_order() {
        let h: Arc<dyn Hamiltonian> = Arc::new(LqHamiltonian::isotropic(1, 1.0, 0.0));
        let err = |steps: usize| {
            let traj =
                integrate_characteristics(h.as_ref(), &[v1(1.0)], &[v1(0.0)], 0.0, 1.0, steps)
                    .unwrap();
            (traj.states[0][steps][0] - 1.0f64.cos()).abs()
        };
        let ratio = err(20) / err(40);
        assert!(
            (12.0..20.0).contains(&ratio),
            "step halving changed the error by {ratio}, expected ~16"
        );
    }

    #[test]
    fn blow_up_reports_last_finite_time() {
        // q = -1e6 gives exponential growth ~ e^{1000 t}: overflow before T.
        let h: Arc<dyn Hamiltonian> = Arc::new(LqHamiltonian::isotropic(1, -1e6, 0.0));
        let err =
            integrate_characteristics(h.as_ref(), &[v1(1.0)], &[v1(0.0)], 0.0, 2.0, 200)
                .unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("last finite time"), "message: {msg}");
    }

    #[test]
    fn time_reversal_recovers_initial_state() {
        let h: Arc<dyn Hamiltonian> = Arc::new(LqHamiltonian::isotropic(1, 1.0, 0.5));
        let fwd =
            integrate_characteristics(h.as_ref(), &[v1(1.0)], &[v1(0.3)], 0.0, 1.0, 400).unwrap();
        let last = fwd.times.len() - 1;
        let bwd = integrate_characteristics(
            h.as_ref(),
            &[fwd.states[0][last].clone()],
            &[fwd.costates[0][last].clone()],
            1.0,
            0.0,
            400,
        )
        .unwrap();
        let back = bwd.times.len() - 1;
        assert!((bwd.states[0][back][0] - 1.0).abs() < 1e-7);
        assert!((bwd.costates[0][back][0] - 0.3).abs() < 1e-7);
    }

    #[test]
    fn shooting_lq_closed_form() {
        let sol = ShootingSolver.solve(&lq_problem(1000), &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.trajectories.costates[0][0][0] - 0.5).abs() < 1e-6);
        let last = sol.trajectories.times.len() - 1;
        assert!((sol.trajectories.states[0][last][0] - 0.5).abs() < 1e-6);
        let values = sol.values_at_zero.as_ref().unwrap();
        assert!((values[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn shooting_zero_horizon_limit() {
        let problem = MfgProblem::new(
            kinetic(),
            Arc::new(QuadraticCost::isotropic(1, 1.0)),
            vec![v1(1.0)],
            1e-8,
            2,
            0.0,
            0.0,
        )
        .unwrap();
        let sol = ShootingSolver.solve(&problem, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.trajectories.costates[0][0][0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn shooting_mean_field_lq() {
        let sol = ShootingSolver.solve(&mean_field_lq(1000), &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.trajectories.costates[0][0][0] + 0.5).abs() < 1e-6);
        assert!((sol.trajectories.costates[1][0][0] - 0.5).abs() < 1e-6);
        let last = sol.trajectories.times.len() - 1;
        assert!((sol.trajectories.states[0][last][0] + 0.5).abs() < 1e-6);
        assert!((sol.trajectories.states[1][last][0] - 0.5).abs() < 1e-6);
        let values = sol.values_at_zero.as_ref().unwrap();
        assert!((values[0] - 0.25).abs() < 1e-6);
        assert!((values[1] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn values_vanish_for_zero_cost() {
        let problem = MfgProblem::new(
            kinetic(),
            Arc::new(QuadraticCost::isotropic(1, 0.0)),
            vec![v1(1.0)],
            1.0,
            100,
            0.0,
            0.0,
        )
        .unwrap();
        let sol = ShootingSolver.solve(&problem, &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.values_at_zero.as_ref().unwrap()[0].abs() < 1e-10);
    }

    #[test]
    fn values_match_action_integral() {
        // For H = |p|^2/2 the Legendre transform gives L = |v|^2/2 and
        // v = -p along the flow, so V(0) = ∫ |p|^2/2 dt + G(x(T)).
        let sol = ShootingSolver.solve(&lq_problem(1000), &SolveOptions::default()).unwrap();
        let traj = &sol.trajectories;
        let steps = traj.times.len() - 1;
        let dt = traj.times[steps] / steps as f64;
        let f: Vec<f64> = (0..=steps).map(|k| 0.5 * traj.costates[0][k].dot(&traj.costates[0][k])).collect();
        let mut action = f[0] + f[steps];
        for (k, fk) in f.iter().enumerate().take(steps).skip(1) {
            action += if k % 2 == 1 { 4.0 * fk } else { 2.0 * fk };
        }
        action *= dt / 3.0;
        let mu_t = traj.terminal_measure().unwrap();
        let g = QuadraticCost::isotropic(1, 1.0);
        let direct = action + TerminalCost::value(&g, &traj.states[0][steps], &mu_t);
        assert!((sol.values_at_zero.as_ref().unwrap()[0] - direct).abs() < 1e-6);
    }

    #[test]
    fn odd_step_count_uses_trapezoid() {
        let sol = ShootingSolver.solve(&lq_problem(1001), &SolveOptions::default()).unwrap();
        assert!((sol.values_at_zero.as_ref().unwrap()[0] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn reintegration_reproduces_trajectories() {
        let sol = ShootingSolver.solve(&mean_field_lq(200), &SolveOptions::default()).unwrap();
        let traj = &sol.trajectories;
        let x0: Vec<DVector<f64>> = traj.states.iter().map(|s| s[0].clone()).collect();
        let p0: Vec<DVector<f64>> = traj.costates.iter().map(|c| c[0].clone()).collect();
        let h = kinetic();
        let again = integrate_characteristics(h.as_ref(), &x0, &p0, 0.0, 1.0, 200).unwrap();
        assert!(traj.state_deviation(&again) < 1e-12);
    }

    #[test]
    fn picard_uncoupled_converges_in_one_path_update() {
        let sol = PicardSolver.solve(&lq_problem(500), &SolveOptions::default()).unwrap();
        assert!(sol.converged);
        assert_eq!(sol.iterations, 1);
        let shooting = ShootingSolver.solve(&lq_problem(500), &SolveOptions::default()).unwrap();
        assert!(sol.trajectories.state_deviation(&shooting.trajectories) < 1e-9);
    }

    #[test]
    fn picard_agrees_with_shooting_on_mean_field_lq() {
        let opts = SolveOptions::default();
        let picard = PicardSolver.solve(&mean_field_lq(500), &opts).unwrap();
        let shooting = ShootingSolver.solve(&mean_field_lq(500), &opts).unwrap();
        assert!(picard.converged);
        assert!(picard.trajectories.state_deviation(&shooting.trajectories) < 1e-7);
    }

    #[test]
    fn picard_agrees_on_momentum_coupled_instance() {
        let h: Arc<dyn Hamiltonian> = Arc::new(MeanFieldLqHamiltonian::new(1, 0.5, 0.3).unwrap());
        let g: Arc<dyn TerminalCost> = Arc::new(QuadraticCost::isotropic(1, 1.0));
        let mut rng = rng_from_seed(2);
        let x0 = MeasureSampler::new(3, 1, Distribution::Normal, 1.0)
            .sample(&mut rng)
            .unwrap()
            .points()
            .to_vec();
        let problem = MfgProblem::new(h, g, x0, 0.5, 400, 0.0, 0.0).unwrap();
        let opts = SolveOptions::default();
        let picard = PicardSolver.solve(&problem, &opts).unwrap();
        let shooting = ShootingSolver.solve(&problem, &opts).unwrap();
        assert!(picard.converged && shooting.converged);
        assert!(picard.trajectories.state_deviation(&shooting.trajectories) < 1e-6);
    }

    #[test]
    fn px_coupled_anti_cost_instance_converges() {
        let h: Arc<dyn Hamiltonian> =
            Arc::new(PxCoupledHamiltonian::new(kinetic(), 2.0).unwrap());
        let g: Arc<dyn TerminalCost> = Arc::new(ConcaveQuadraticCost::new(1, 2.0).unwrap());
        let mut rng = rng_from_seed(4);
        let x0 = MeasureSampler::new(4, 1, Distribution::Normal, 1.0)
            .sample(&mut rng)
            .unwrap()
            .points()
            .to_vec();
        let problem = MfgProblem::new(h, g, x0, 0.5, 400, 0.0, 0.0).unwrap();
        let opts = SolveOptions::default();
        for strategy in solver_registry() {
            let sol = strategy.solve(&problem, &opts).unwrap();
            assert!(sol.converged, "{} did not converge", strategy.name());
        }
    }

    #[test]
    fn conjugate_point_instance_does_not_converge() {
        // G = -|x|^2 at horizon T = 1/a: the terminal residual is constant
        // in p0, so no solution exists and the solver reports failure.
        let problem = MfgProblem::new(
            kinetic(),
            Arc::new(ConcaveQuadraticCost::new(1, 2.0).unwrap()),
            vec![v1(1.0)],
            0.5,
            100,
            0.0,
            0.0,
        )
        .unwrap();
        let sol = ShootingSolver.solve(&problem, &SolveOptions::default()).unwrap();
        assert!(!sol.converged);
        assert!(sol.values_at_zero.is_none());
    }

    #[test]
    fn equivalence_identity_at_alpha_zero() {
        let report = transform_equivalence(
            &lq_problem(400),
            0.0,
            &ShootingSolver,
            &SolveOptions::default(),
            1e-6,
        )
        .unwrap();
        assert!(report.pass);
        assert!(report.trajectory_dev < 1e-10);
        assert!(report.costate_dev < 1e-10);
        assert!(report.value_dev < 1e-10);
    }

    #[test]
    fn equivalence_lq_alpha_one() {
        let problem = lq_problem(1000);
        let report =
            transform_equivalence(&problem, 1.0, &ShootingSolver, &SolveOptions::default(), 1e-6)
                .unwrap();
        assert!(report.pass, "deviations: {report:?}");

        // Shifted costate and shifted value, by hand: p~(0) = 1.5 and
        // V~(0) - V(0) = 0.5.
        let shifted = ShootingSolver
            .solve(&problem.transformed(1.0), &SolveOptions::default())
            .unwrap();
        assert!((shifted.trajectories.costates[0][0][0] - 1.5).abs() < 1e-6);
        let base = ShootingSolver.solve(&problem, &SolveOptions::default()).unwrap();
        let dv = shifted.values_at_zero.as_ref().unwrap()[0]
            - base.values_at_zero.as_ref().unwrap()[0];
        assert!((dv - 0.5).abs() < 1e-6);
    }

    #[test]
    fn equivalence_alpha_sweep_mean_field() {
        for alpha in [-1.0, 0.5, 2.0] {
            let report = transform_equivalence(
                &mean_field_lq(1000),
                alpha,
                &ShootingSolver,
                &SolveOptions::default(),
                1e-6,
            )
            .unwrap();
            assert!(report.pass, "alpha = {alpha}: {report:?}");
        }
    }

    #[test]
    fn solver_registry_lookup() {
        assert_eq!(solver_by_name("shooting").unwrap().name(), "shooting");
        assert_eq!(solver_by_name("picard").unwrap().name(), "picard");
        assert!(solver_by_name("simplex").is_err());
    }
}
