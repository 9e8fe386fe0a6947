//! Newton shooting on the unknown initial costates.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{inf_norm, solve_linear};

use super::{
    integrate_characteristics, terminal_residual, values_at_zero, MfgProblem, MfgSolution,
    MfgSolverStrategy, SolveOptions, Trajectories,
};

pub(crate) struct NewtonOutcome {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub fallback_used: bool,
}

/// Damped Newton with a forward-difference Jacobian.
///
/// Trial evaluations that fail (blow-ups) count as rejected steps; a
/// singular Jacobian switches that iteration to a damped fixed-point step.
/// Halving stops after 20 tries; if no step decreases the residual the best
/// iterate is returned unconverged.
pub(crate) fn damped_newton<F>(
    mut residual: F,
    start: DVector<f64>,
    tol: f64,
    max_iter: usize,
    damping: f64,
) -> Result<NewtonOutcome>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let dim = start.len();
    let mut current = start;
    let mut r = residual(&current)?;
    let mut norm = inf_norm(&r);
    let mut fallback_used = false;
    let mut iterations = 0usize;

    while norm > tol && iterations < max_iter {
        iterations += 1;
        let step_scale = 1e-6 * (1.0 + inf_norm(&current));
        let mut jac = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let mut probe = current.clone();
            probe[k] += step_scale;
            let rk = residual(&probe)?;
            for row in 0..dim {
                jac[(row, k)] = (rk[row] - r[row]) / step_scale;
            }
        }
        let mut delta = match solve_linear(&jac, &(-&r)) {
            Ok(d) => d,
            Err(_) => {
                fallback_used = true;
                -&r * damping
            }
        };
        let mut accepted = false;
        for _ in 0..=20 {
            let candidate = &current + &delta;
            match residual(&candidate) {
                Ok(rc) => {
                    let nc = inf_norm(&rc);
                    if nc.is_finite() && nc < norm {
                        current = candidate;
                        r = rc;
                        norm = nc;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => {} // blow-up at the trial point: halve and retry
            }
            delta *= 0.5;
        }
        if !accepted {
            break;
        }
    }

    let converged = norm <= tol;
    Ok(NewtonOutcome { solution: current, iterations, converged, fallback_used })
}

pub(crate) fn flatten(vs: &[DVector<f64>]) -> DVector<f64> {
    let d = vs[0].len();
    let mut out = DVector::zeros(vs.len() * d);
    for (i, v) in vs.iter().enumerate() {
        for a in 0..d {
            out[i * d + a] = v[a];
        }
    }
    out
}

pub(crate) fn unflatten(v: &DVector<f64>, n: usize, d: usize) -> Vec<DVector<f64>> {
    (0..n).map(|i| DVector::from_fn(d, |a, _| v[i * d + a])).collect()
}

fn integrate_from(problem: &MfgProblem, p0_flat: &DVector<f64>) -> Result<Trajectories> {
    let p0 = unflatten(p0_flat, problem.agents(), problem.dim());
    integrate_characteristics(
        problem.hamiltonian.as_ref(),
        &problem.initial_points,
        &p0,
        0.0,
        problem.horizon,
        problem.steps,
    )
}

/// Default initial costate guess: the terminal-condition gradient evaluated
/// on the initial cloud (exact in the zero-horizon limit).
pub(crate) fn initial_costate_guess(problem: &MfgProblem) -> DVector<f64> {
    let mu0 = problem.initial_measure();
    let guesses: Vec<DVector<f64>> = problem
        .initial_points
        .iter()
        .map(|x| problem.cost.grad_x(x, &mu0))
        .collect();
    flatten(&guesses)
}

pub(crate) fn solution_from_costates(
    problem: &MfgProblem,
    p0_flat: &DVector<f64>,
    iterations: usize,
    converged: bool,
    fallback_used: bool,
    method: &'static str,
    displacement_history: Vec<f64>,
) -> Result<MfgSolution> {
    let trajectories = integrate_from(problem, p0_flat)?;
    let (_, residual_norm) = terminal_residual(&trajectories, problem.cost.as_ref())?;
    let values = if converged {
        Some(values_at_zero(
            &trajectories,
            problem.hamiltonian.as_ref(),
            problem.cost.as_ref(),
        )?)
    } else {
        None
    };
    Ok(MfgSolution {
        trajectories,
        values_at_zero: values,
        residual_norm,
        iterations,
        converged,
        method,
        fallback_used,
        displacement_history,
    })
}

/// Newton shooting on the stacked initial costates of all agents.
pub struct ShootingSolver;

impl MfgSolverStrategy for ShootingSolver {
    fn name(&self) -> &'static str {
        "shooting"
    }

    fn solve(&self, problem: &MfgProblem, opts: &SolveOptions) -> Result<MfgSolution> {
        let residual = |p0: &DVector<f64>| -> Result<DVector<f64>> {
            let traj = integrate_from(problem, p0)?;
            let (stacked, _) = terminal_residual(&traj, problem.cost.as_ref())?;
            Ok(stacked)
        };
        let outcome = damped_newton(
            residual,
            initial_costate_guess(problem),
            opts.tol,
            opts.max_iter,
            opts.damping,
        )?;
        solution_from_costates(
            problem,
            &outcome.solution,
            outcome.iterations,
            outcome.converged,
            outcome.fallback_used,
            "shooting",
            Vec::new(),
        )
    }
}
