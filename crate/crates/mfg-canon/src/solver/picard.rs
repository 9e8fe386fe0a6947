//! Damped fixed-point iteration on the measure path.
//!
//! Each outer iteration freezes the measure path, solves every agent's
//! decoupled two-point boundary problem by d-dimensional shooting, and
//! relaxes the path toward the new trajectories. Convergence is declared
//! when consecutive agent solves stop moving; the resulting costates are
//! then polished by a few Newton steps on the coupled system so the final
//! trajectories satisfy exactly the same discrete equations as the shooting
//! solver's.

use nalgebra::DVector;

use crate::error::Result;
use crate::measures::EmpiricalMeasure;

use super::shooting::{damped_newton, flatten, solution_from_costates};
use super::{
    integrate_single_frozen, MeasurePath, MfgProblem, MfgSolution, MfgSolverStrategy, SolveOptions,
    Trajectories,
};

const POLISH_ITERATIONS: usize = 8;

pub struct PicardSolver;

struct AgentSolve {
    p0: DVector<f64>,
    states: Vec<DVector<f64>>,
}

fn solve_agent(
    problem: &MfgProblem,
    agent: usize,
    path: &MeasurePath,
    guess: &DVector<f64>,
    opts: &SolveOptions,
) -> Result<AgentSolve> {
    let x0 = &problem.initial_points[agent];
    let h = problem.hamiltonian.as_ref();
    let g = problem.cost.as_ref();
    let mu_t = path.terminal().clone();
    let residual = |p0: &DVector<f64>| -> Result<DVector<f64>> {
        let traj = integrate_single_frozen(h, x0, p0, path, 0.0, problem.horizon, problem.steps)?;
        let last = traj.times.len() - 1;
        Ok(&traj.costates[0][last] - g.grad_x(&traj.states[0][last], &mu_t))
    };
    let outcome = damped_newton(residual, guess.clone(), opts.tol, opts.max_iter, opts.damping)?;
    let traj =
        integrate_single_frozen(h, x0, &outcome.solution, path, 0.0, problem.horizon, problem.steps)?;
    Ok(AgentSolve {
        p0: outcome.solution,
        states: traj.states.into_iter().next().unwrap(),
    })
}

fn path_from_states(
    times: &[f64],
    states: &[Vec<DVector<f64>>],
) -> Result<MeasurePath> {
    let mut snapshots = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let points = states.iter().map(|agent| agent[k].clone()).collect();
        snapshots.push(EmpiricalMeasure::new(points)?);
    }
    MeasurePath::new(times.to_vec(), snapshots)
}

fn relax_path(old: &MeasurePath, new: &MeasurePath, times: &[f64], theta: f64) -> Result<MeasurePath> {
    let mut snapshots = Vec::with_capacity(times.len());
    for &t in times {
        let a = old.at(t);
        let b = new.at(t);
        let points = a
            .points()
            .iter()
            .zip(b.points())
            .map(|(pa, pb)| pa * (1.0 - theta) + pb * theta)
            .collect();
        snapshots.push(EmpiricalMeasure::new(points)?);
    }
    MeasurePath::new(times.to_vec(), snapshots)
}

fn displacement(a: &[Vec<DVector<f64>>], b: &[Vec<DVector<f64>>]) -> f64 {
    let mut dev: f64 = 0.0;
    for (agent_a, agent_b) in a.iter().zip(b) {
        for (xa, xb) in agent_a.iter().zip(agent_b) {
            dev = dev.max(crate::linalg::inf_norm(&(xa - xb)));
        }
    }
    dev
}

impl MfgSolverStrategy for PicardSolver {
    fn name(&self) -> &'static str {
        "picard"
    }

    fn solve(&self, problem: &MfgProblem, opts: &SolveOptions) -> Result<MfgSolution> {
        let n = problem.agents();
        let mu0 = problem.initial_measure();
        let times: Vec<f64> = (0..=problem.steps)
            .map(|k| problem.horizon * k as f64 / problem.steps as f64)
            .collect();

        let mut path = MeasurePath::constant(&mu0, &times);
        let mut guesses: Vec<DVector<f64>> = problem
            .initial_points
            .iter()
            .map(|x| problem.cost.grad_x(x, &mu0))
            .collect();

        let mut prev_states: Option<Vec<Vec<DVector<f64>>>> = None;
        let mut history = Vec::new();
        let mut path_updates = 0usize;
        let mut outer_converged = false;
        let mut final_p0 = guesses.clone();

        for _ in 0..opts.max_iter {
            let mut solves = Vec::with_capacity(n);
            for i in 0..n {
                solves.push(solve_agent(problem, i, &path, &guesses[i], opts)?);
            }
            let states: Vec<Vec<DVector<f64>>> = solves.iter().map(|s| s.states.clone()).collect();
            guesses = solves.iter().map(|s| s.p0.clone()).collect();
            final_p0 = guesses.clone();

            if let Some(prev) = &prev_states {
                let disp = displacement(prev, &states);
                history.push(disp);
                if disp <= opts.tol {
                    outer_converged = true;
                    break;
                }
            }

            let new_path = path_from_states(&times, &states)?;
            path = relax_path(&path, &new_path, &times, opts.damping)?;
            path_updates += 1;
            prev_states = Some(states);
        }

        // Polish on the coupled self-consistent system so the reported
        // solution solves the same discrete equations as the shooting
        // solver.
        let residual = |p0: &DVector<f64>| -> Result<DVector<f64>> {
            let p0v = super::shooting::unflatten(p0, n, problem.dim());
            let traj: Trajectories = super::integrate_characteristics(
                problem.hamiltonian.as_ref(),
                &problem.initial_points,
                &p0v,
                0.0,
                problem.horizon,
                problem.steps,
            )?;
            let (stacked, _) = super::terminal_residual(&traj, problem.cost.as_ref())?;
            Ok(stacked)
        };
        let polish = damped_newton(
            residual,
            flatten(&final_p0),
            opts.tol,
            POLISH_ITERATIONS,
            opts.damping,
        )?;

        let converged = outer_converged && polish.converged;
        solution_from_costates(
            problem,
            &polish.solution,
            path_updates,
            converged,
            polish.fallback_used,
            "picard",
            history,
        )
    }
}
