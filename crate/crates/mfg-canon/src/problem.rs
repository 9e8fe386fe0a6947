//! Versioned problem-file schema the CLI ingests.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::models::{DerivativeBounds, Provenance};
use crate::monotonicity::LambdaParams;
use crate::sampling::MeasureSampler;

pub const PROBLEM_VERSION: &str = "mfg-canon/1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TransformSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TransformSpec {
    pub alpha: f64,
}

/// Declared derivative bounds plus the optional drift eigenvalue bound used
/// by the factored-drift certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundsSpec {
    pub c0: f64,
    pub kappa_xp_lower: f64,
    pub norm_pp: f64,
    #[serde(default)]
    pub norm_xx: f64,
    #[serde(default)]
    pub norm_pmu: f64,
    #[serde(default)]
    pub norm_xmu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_a0: Option<f64>,
}

impl BoundsSpec {
    pub fn to_bounds(&self) -> Result<DerivativeBounds> {
        DerivativeBounds::declared(
            self.c0,
            self.kappa_xp_lower,
            self.norm_pp,
            self.norm_xx,
            self.norm_pmu,
            self.norm_xmu,
            self.l2,
        )
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LambdaSpec {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl LambdaSpec {
    pub fn to_params(&self) -> Result<LambdaParams> {
        LambdaParams::new(self.l0, self.l1, self.l2, self.l3)
    }
}

/// Either explicit support points or a seeded sampler; exactly one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplerSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub distribution: crate::sampling::Distribution,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl SamplerSpec {
    pub fn to_sampler(&self) -> MeasureSampler {
        MeasureSampler::new(self.n, self.d, self.distribution, self.scale)
    }
}

impl MeasureSpec {
    pub fn validate(&self) -> Result<()> {
        match (&self.points, &self.sampler) {
            (Some(_), Some(_)) => {
                Err(Error::invalid("measure: give either explicit points or a sampler, not both"))
            }
            (None, None) => Err(Error::invalid("measure: needs explicit points or a sampler")),
            _ => Ok(()),
        }
    }

    pub fn explicit_points(&self) -> Result<Option<EmpiricalMeasure>> {
        self.validate()?;
        match &self.points {
            Some(rows) => Ok(Some(EmpiricalMeasure::from_rows(rows)?)),
            None => Ok(None),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverSpec {
    #[serde(rename = "T")]
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub beta0: f64,
    #[serde(default = "default_equiv_tol")]
    pub equiv_tol: f64,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    50
}

fn default_method() -> String {
    "shooting".to_string()
}

fn default_damping() -> f64 {
    0.5
}

fn default_equiv_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckSpec {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Scale of the sampled momentum fields.
    #[serde(default = "default_scale")]
    pub p_scale: f64,
    /// Requested check kinds; inferred from the present models when empty.
    #[serde(default)]
    pub checks: Vec<String>,
    /// Shift parameter for the alpha-displacement check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

fn default_instances() -> usize {
    20
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            tolerance: None,
            p_scale: 1.0,
            checks: Vec::new(),
            alpha: None,
        }
    }
}

/// Top-level problem file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaSpec>,
    /// Directly supplied semi-monotonicity constant of the cost.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_semi_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<MeasureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let pf: ProblemFile = serde_json::from_str(text)?;
        pf.validate()?;
        Ok(pf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != PROBLEM_VERSION {
            return Err(Error::invalid(format!(
                "unrecognized problem version '{}' (expected '{PROBLEM_VERSION}')",
                self.version
            )));
        }
        if let Some(m) = &self.measure {
            m.validate()?;
        }
        Ok(())
    }

    /// Effective seed: CLI flag, then sampler seed, then top-level seed.
    pub fn effective_seed(&self, flag: Option<u64>) -> u64 {
        flag.or_else(|| self.measure.as_ref().and_then(|m| m.sampler.as_ref()).and_then(|s| s.seed))
            .or(self.seed)
            .unwrap_or(0)
    }
}

/// Bounds provenance for reports: declared in the file vs sampled here.
pub fn bounds_provenance(spec: &Option<BoundsSpec>) -> Provenance {
    if spec.is_some() {
        Provenance::Declared
    } else {
        Provenance::Sampled
    }
}
