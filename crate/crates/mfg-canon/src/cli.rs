//! Batch workflows behind the command-line interface.
//!
//! Exit-code contract: 0 for completed runs (refused certificates and
//! failed monotonicity checks are findings, not errors), 2 for usage and
//! validation problems, 3 for numerical failures, 4 for internal
//! consistency violations.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::certificates::{
    alpha_interval, curvature_bound, factored_drift_certificate, lambda_majorant,
    semi_constant_from_lambda, wellposedness_certificate, SemiMonotonicity,
};
use crate::error::{Error, Result};
use crate::measures::{Coupling, EmpiricalMeasure};
use crate::models::{
    build_cost, build_hamiltonian, estimate_hamiltonian_bounds, DerivativeBounds, Hamiltonian,
    TerminalCost,
};
use crate::monotonicity::{
    check_alpha_displacement, check_anti_monotone, check_displacement_cost,
    check_displacement_hamiltonian, first_order_gap_cost, first_order_gap_hamiltonian,
    zero_field, MonotonicityReport, Verdict,
};
use crate::problem::{ModelSpec, ProblemFile, PROBLEM_VERSION};
use crate::report::{trajectory_table, ReportFile, SolutionSummary};
use crate::sampling::{
    rng_from_seed, sample_bounds_instances, sample_p_field, sample_permutation, sample_vector,
    Distribution,
};
use crate::solver::{solver_by_name, transform_equivalence, MfgProblem, SolveOptions};
use crate::transform::{transform_cost, transform_hamiltonian, TransformTag};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workflow {
    Certify,
    Check,
    Solve,
    Equivalence,
}

impl Workflow {
    pub fn as_str(self) -> &'static str {
        match self {
            Workflow::Certify => "certify",
            Workflow::Check => "check",
            Workflow::Solve => "solve",
            Workflow::Equivalence => "equivalence",
        }
    }
}

pub struct WorkflowOutput {
    pub report: ReportFile,
    pub trajectory_table: Option<String>,
    pub exit_code: i32,
}

/// Run one workflow on raw problem-file text.
pub fn run_workflow(
    workflow: Workflow,
    problem_text: &str,
    alpha_flag: Option<f64>,
    seed_flag: Option<u64>,
) -> Result<WorkflowOutput> {
    let started = Instant::now();
    let echo: Value = serde_json::from_str(problem_text)?;
    let problem = ProblemFile::from_json(problem_text)?;
    let seed = problem.effective_seed(seed_flag);

    let (payload, table, exit_code) = match workflow {
        Workflow::Certify => {
            let payload = cmd_certify(&problem, seed)?;
            (payload, None, 0)
        }
        Workflow::Check => {
            let payload = cmd_check(&problem, alpha_flag, seed)?;
            (payload, None, 0)
        }
        Workflow::Solve => cmd_solve(&problem, seed)?,
        Workflow::Equivalence => {
            let payload = cmd_equivalence(&problem, alpha_flag, seed)?;
            (payload, None, 0)
        }
    };

    let report = ReportFile {
        version: PROBLEM_VERSION.to_string(),
        workflow: workflow.as_str().to_string(),
        seed,
        input_echo: echo,
        payload,
        wall_clock_ms: started.elapsed().as_millis(),
    };
    Ok(WorkflowOutput { report, trajectory_table: table, exit_code })
}

fn build_h_model(spec: &ModelSpec) -> Result<Arc<dyn Hamiltonian>> {
    let base = build_hamiltonian(&spec.kind, &spec.params)?;
    Ok(match &spec.transform {
        Some(t) => transform_hamiltonian(base, t.alpha),
        None => base,
    })
}

fn build_g_model(spec: &ModelSpec) -> Result<Arc<dyn TerminalCost>> {
    let base = build_cost(&spec.kind, &spec.params)?;
    Ok(match &spec.transform {
        Some(t) => transform_cost(base, t.alpha),
        None => base,
    })
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

fn cmd_certify(problem: &ProblemFile, seed: u64) -> Result<Value> {
    let mut payload = Map::new();
    let lambda = problem.lambda.map(|l| l.to_params()).transpose()?;

    if let Some(lambda) = &lambda {
        payload.insert(
            "semi_constant_from_lambda".into(),
            json!(semi_constant_from_lambda(lambda)?),
        );
        payload.insert("lambda_majorant".into(), json!(lambda_majorant(lambda)?));
    }

    let bounds: Option<DerivativeBounds> = match &problem.bounds {
        Some(spec) => Some(spec.to_bounds()?),
        None => match &problem.hamiltonian {
            Some(hspec) => {
                let h = build_h_model(hspec)?;
                let mut rng = rng_from_seed(seed);
                let instances = problem.check.as_ref().map(|c| c.instances).unwrap_or(20);
                let samples = sample_bounds_instances(&mut rng, h.dim(), 4, instances.max(1), 1.0)?;
                let estimated = estimate_hamiltonian_bounds(h.as_ref(), samples.clone())?;
                payload.insert("estimated_bounds".into(), serde_json::to_value(&estimated)?);
                // Coercivity diagnostic; informational only.
                let slack = crate::models::bounds::sampled_duality_slack(h.as_ref(), samples)?;
                payload.insert("sampled_duality_slack".into(), json!(slack));
                Some(estimated)
            }
            None => None,
        },
    };

    match &bounds {
        Some(b) => {
            payload.insert("curvature_bound".into(), json!(curvature_bound(b)));
            let outcome = alpha_interval(b)?;
            payload.insert("alpha_interval".into(), serde_json::to_value(&outcome)?);

            let semi = match (problem.g_semi_alpha, &lambda) {
                (Some(a), _) => Some(SemiMonotonicity::Constant(a)),
                (None, Some(l)) => Some(SemiMonotonicity::FromLambda(*l)),
                (None, None) => None,
            };
            if let Some(semi) = semi {
                let certificate = wellposedness_certificate(b, &semi)?;
                payload.insert("certificate".into(), serde_json::to_value(&certificate)?);
            }

            if let (Some(kappa_a0), Some(lambda)) =
                (problem.bounds.as_ref().and_then(|s| s.kappa_a0), &lambda)
            {
                if b.l2.is_some() {
                    let cert = factored_drift_certificate(b, kappa_a0, lambda)?;
                    payload.insert("factored_drift_certificate".into(), serde_json::to_value(&cert)?);
                }
            }
        }
        None => {
            if lambda.is_none() {
                return Err(Error::invalid(
                    "certify needs derivative bounds, a Hamiltonian to estimate them from, or lambda parameters",
                ));
            }
        }
    }

    Ok(Value::Object(payload))
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

struct InstanceSource<'a> {
    problem: &'a ProblemFile,
    fixed: Option<EmpiricalMeasure>,
}

impl<'a> InstanceSource<'a> {
    fn new(problem: &'a ProblemFile) -> Result<Self> {
        let spec = problem
            .measure
            .as_ref()
            .ok_or_else(|| Error::invalid("check needs a measure (points or sampler)"))?;
        Ok(Self { problem, fixed: spec.explicit_points()? })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Result<EmpiricalMeasure> {
        match &self.fixed {
            Some(mu) => Ok(mu.clone()),
            None => {
                let sampler = self
                    .problem
                    .measure
                    .as_ref()
                    .and_then(|m| m.sampler.as_ref())
                    .expect("validated: points or sampler");
                sampler.to_sampler().sample(rng)
            }
        }
    }

    /// A nearby second measure for first-order coupling checks.
    fn draw_pair(&self, rng: &mut ChaCha8Rng) -> Result<(EmpiricalMeasure, EmpiricalMeasure)> {
        let mu = self.draw(rng)?;
        let nu_points: Vec<DVector<f64>> = mu
            .points()
            .iter()
            .map(|p| p + sample_vector(rng, p.len(), Distribution::Normal, 0.5))
            .collect();
        Ok((mu, EmpiricalMeasure::new(nu_points)?))
    }
}

fn worst_of(reports: Vec<MonotonicityReport>) -> Option<MonotonicityReport> {
    reports.into_iter().min_by(|a, b| a.margin.partial_cmp(&b.margin).unwrap())
}

fn aggregate_json(kind: &str, instances: usize, report: &MonotonicityReport) -> Result<Value> {
    let mut v = serde_json::to_value(report)?;
    let obj = v.as_object_mut().expect("report serializes to an object");
    obj.insert("kind".into(), json!(kind));
    obj.insert("sampled_instances".into(), json!(instances));
    Ok(v)
}

fn scalar_check_json(kind: &str, instances: usize, worst: f64, tol: f64) -> Value {
    let verdict = if worst >= -tol { Verdict::Pass } else { Verdict::Fail };
    json!({
        "kind": kind,
        "sampled_instances": instances,
        "extremal_eigenvalue": worst,
        "margin": worst,
        "verdict": verdict,
        "tolerance": tol,
    })
}

fn cmd_check(problem: &ProblemFile, alpha_flag: Option<f64>, seed: u64) -> Result<Value> {
    let check = problem.check.clone().unwrap_or_default();
    let h_model = problem.hamiltonian.as_ref().map(build_h_model).transpose()?;
    let g_model = problem.cost.as_ref().map(build_g_model).transpose()?;
    if h_model.is_none() && g_model.is_none() {
        return Err(Error::invalid("check needs at least one model"));
    }
    let lambda = problem.lambda.map(|l| l.to_params()).transpose()?;
    let alpha = check.alpha.or(alpha_flag);

    let mut kinds: Vec<String> = check.checks.clone();
    if kinds.is_empty() {
        if g_model.is_some() {
            kinds.push("disp-G-2nd".into());
            if lambda.is_some() {
                kinds.push("anti-G".into());
            }
        }
        if h_model.is_some() {
            kinds.push(if alpha.is_some() { "alpha-disp-H".into() } else { "disp-H-2nd".into() });
        }
    }

    let source = InstanceSource::new(problem)?;
    let instances = check.instances.max(1);
    let mut rng = rng_from_seed(seed);
    let mut results = Vec::new();

    for kind in &kinds {
        match kind.as_str() {
            "disp-G-2nd" => {
                let g = require_g(&g_model)?;
                let mut reports = Vec::new();
                for _ in 0..instances {
                    let mu = source.draw(&mut rng)?;
                    reports.push(check_displacement_cost(g.as_ref(), &mu, check.tolerance)?);
                }
                let worst = worst_of(reports).expect("at least one instance");
                results.push(aggregate_json(kind, instances, &worst)?);
            }
            "anti-G" => {
                let g = require_g(&g_model)?;
                let lambda = lambda
                    .as_ref()
                    .ok_or_else(|| Error::invalid("anti-G check needs lambda parameters"))?;
                let mut reports = Vec::new();
                for _ in 0..instances {
                    let mu = source.draw(&mut rng)?;
                    reports.push(check_anti_monotone(g.as_ref(), &mu, lambda, check.tolerance)?);
                }
                let worst = worst_of(reports).expect("at least one instance");
                results.push(aggregate_json(kind, instances, &worst)?);
            }
            "disp-H-2nd" | "alpha-disp-H" => {
                let h = require_h(&h_model)?;
                let mut reports = Vec::new();
                for k in 0..instances {
                    let mu = source.draw(&mut rng)?;
                    // Instance 0 keeps the default zero momentum field.
                    let p_field = if k == 0 {
                        zero_field(mu.len(), mu.dim())
                    } else {
                        sample_p_field(&mut rng, mu.len(), mu.dim(), check.p_scale)
                    };
                    let report = if kind == "alpha-disp-H" {
                        let a = alpha.ok_or_else(|| {
                            Error::invalid("alpha-disp-H check needs an alpha (flag or check.alpha)")
                        })?;
                        check_alpha_displacement(&h, &mu, &p_field, a, check.tolerance)?
                    } else {
                        check_displacement_hamiltonian(h.as_ref(), &mu, &p_field, check.tolerance)?
                    };
                    reports.push(report);
                }
                let worst = worst_of(reports).expect("at least one instance");
                results.push(aggregate_json(kind, instances, &worst)?);
            }
            "disp-G-1st" => {
                let g = require_g(&g_model)?;
                let mut worst = f64::INFINITY;
                for _ in 0..instances {
                    let (mu, nu) = source.draw_pair(&mut rng)?;
                    let perm = sample_permutation(&mut rng, mu.len());
                    let coupling = Coupling::new(mu, nu, perm)?;
                    worst = worst.min(first_order_gap_cost(g.as_ref(), &coupling)?);
                }
                results.push(scalar_check_json(kind, instances, worst, check.tolerance.unwrap_or(1e-8)));
            }
            "disp-H-1st" => {
                let h = require_h(&h_model)?;
                let mut worst = f64::INFINITY;
                for _ in 0..instances {
                    let (mu, nu) = source.draw_pair(&mut rng)?;
                    let n = mu.len();
                    let d = mu.dim();
                    let perm = sample_permutation(&mut rng, n);
                    let p1 = sample_p_field(&mut rng, n, d, check.p_scale);
                    let p2 = sample_p_field(&mut rng, n, d, check.p_scale);
                    let coupling = Coupling::new(mu, nu, perm)?;
                    worst = worst.min(first_order_gap_hamiltonian(h.as_ref(), &coupling, &p1, &p2)?);
                }
                results.push(scalar_check_json(kind, instances, worst, check.tolerance.unwrap_or(1e-8)));
            }
            other => {
                return Err(Error::invalid(format!("unknown check kind '{other}'")));
            }
        }
    }

    Ok(json!({ "checks": results }))
}

fn require_g(g: &Option<Arc<dyn TerminalCost>>) -> Result<Arc<dyn TerminalCost>> {
    g.clone().ok_or_else(|| Error::invalid("this check needs a cost model"))
}

fn require_h(h: &Option<Arc<dyn Hamiltonian>>) -> Result<Arc<dyn Hamiltonian>> {
    h.clone().ok_or_else(|| Error::invalid("this check needs a Hamiltonian model"))
}

// ---------------------------------------------------------------------------
// solve / equivalence
// ---------------------------------------------------------------------------

fn build_mfg_problem(problem: &ProblemFile, seed: u64) -> Result<(MfgProblem, SolveOptions, String, f64)> {
    let hspec = problem
        .hamiltonian
        .as_ref()
        .ok_or_else(|| Error::invalid("solve needs a Hamiltonian model"))?;
    let gspec = problem
        .cost
        .as_ref()
        .ok_or_else(|| Error::invalid("solve needs a cost model"))?;
    let sspec = problem
        .solver
        .as_ref()
        .ok_or_else(|| Error::invalid("solve needs solver options"))?;
    let mspec = problem
        .measure
        .as_ref()
        .ok_or_else(|| Error::invalid("solve needs initial points or a sampler"))?;

    let h = build_h_model(hspec)?;
    let g = build_g_model(gspec)?;
    let initial = match mspec.explicit_points()? {
        Some(mu) => mu.points().to_vec(),
        None => {
            let sampler = mspec.sampler.as_ref().expect("validated").to_sampler();
            let mut rng = rng_from_seed(seed);
            sampler.sample(&mut rng)?.points().to_vec()
        }
    };
    let mfg = MfgProblem::new(h, g, initial, sspec.horizon, sspec.steps, sspec.beta, sspec.beta0)?;
    let opts = SolveOptions { tol: sspec.tol, max_iter: sspec.max_iter, damping: sspec.damping };
    Ok((mfg, opts, sspec.method.clone(), sspec.equiv_tol))
}

fn cmd_solve(problem: &ProblemFile, seed: u64) -> Result<(Value, Option<String>, i32)> {
    let (mfg, opts, method, _) = build_mfg_problem(problem, seed)?;
    let strategy = solver_by_name(&method)?;
    let solution = strategy.solve(&mfg, &opts)?;
    let summary = SolutionSummary::from_solution(&solution);
    let table = trajectory_table(&solution);
    let exit = if solution.converged { 0 } else { 3 };
    Ok((serde_json::to_value(&summary)?, Some(table), exit))
}

fn cmd_equivalence(problem: &ProblemFile, alpha_flag: Option<f64>, seed: u64) -> Result<Value> {
    let alpha = alpha_flag
        .ok_or_else(|| Error::invalid("equivalence needs --alpha"))?;
    let (mfg, opts, method, equiv_tol) = build_mfg_problem(problem, seed)?;
    let strategy = solver_by_name(&method)?;
    let report = transform_equivalence(&mfg, alpha, strategy.as_ref(), &opts, equiv_tol)?;
    let tag = TransformTag::new(alpha, mfg.beta, mfg.beta0, mfg.hamiltonian.name())?;
    let mut payload = serde_json::to_value(&report)?;
    payload
        .as_object_mut()
        .expect("equivalence report serializes to an object")
        .insert("transform".into(), serde_json::to_value(&tag)?);
    Ok(payload)
}
