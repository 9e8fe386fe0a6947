//! Machine-readable report files and the trajectory table.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::Result;
use crate::solver::MfgSolution;

/// Report envelope. The `payload` is bitwise reproducible for a fixed
/// problem file and seed; `wall_clock_ms` sits outside that guarantee.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: String,
    pub workflow: String,
    pub seed: u64,
    pub input_echo: Value,
    pub payload: Value,
    pub wall_clock_ms: u128,
}

impl ReportFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Solution summary embedded in solve/equivalence payloads.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionSummary {
    pub method: String,
    pub converged: bool,
    pub iterations: usize,
    pub residual_norm: f64,
    pub fallback_used: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values_at_zero: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub displacement_history: Vec<f64>,
    pub agents: usize,
    pub steps: usize,
    pub initial_costates: Vec<Vec<f64>>,
    pub terminal_states: Vec<Vec<f64>>,
}

impl SolutionSummary {
    pub fn from_solution(sol: &MfgSolution) -> Self {
        let last = sol.trajectories.times.len() - 1;
        Self {
            method: sol.method.to_string(),
            converged: sol.converged,
            iterations: sol.iterations,
            residual_norm: sol.residual_norm,
            fallback_used: sol.fallback_used,
            values_at_zero: sol.values_at_zero.clone(),
            displacement_history: sol.displacement_history.clone(),
            agents: sol.trajectories.agents(),
            steps: last,
            initial_costates: sol
                .trajectories
                .costates
                .iter()
                .map(|c| c[0].iter().copied().collect())
                .collect(),
            terminal_states: sol
                .trajectories
                .states
                .iter()
                .map(|s| s[last].iter().copied().collect())
                .collect(),
        }
    }
}

/// Delimited trajectory table: one row per (time, agent) with full
/// round-trip precision, tab separated.
pub fn trajectory_table(sol: &MfgSolution) -> String {
    let traj = &sol.trajectories;
    let d = traj.states[0][0].len();
    let mut header = String::from("time\tagent");
    for a in 0..d {
        header.push_str(&format!("\tx_{a}"));
    }
    for a in 0..d {
        header.push_str(&format!("\tp_{a}"));
    }
    let mut out = header;
    out.push('\n');
    for (k, t) in traj.times.iter().enumerate() {
        for i in 0..traj.agents() {
            out.push_str(&format!("{t}\t{i}"));
            for a in 0..d {
                out.push_str(&format!("\t{}", traj.states[i][k][a]));
            }
            for a in 0..d {
                out.push_str(&format!("\t{}", traj.costates[i][k][a]));
            }
            out.push('\n');
        }
    }
    out
}
