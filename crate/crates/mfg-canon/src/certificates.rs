//! Closed-form well-posedness certificates.
//!
//! Everything here is plain arithmetic on [`DerivativeBounds`] and
//! [`LambdaParams`]: the admissible shift interval, the semi-monotonicity
//! constant certified by anti-monotonicity, and the combined pipeline.
//! Refusal is a value, not an exception — certificates carry every evaluated
//! inequality so a refusal explains itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DerivativeBounds, Provenance};
use crate::monotonicity::LambdaParams;

/// One checked inequality with both sides evaluated.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inequality {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl Inequality {
    fn geq(label: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self { label: label.into(), lhs, rhs, satisfied: lhs >= rhs }
    }
}

/// Closed interval of shift parameters for which the transformed
/// Hamiltonian stays displacement monotone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaInterval {
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub alpha_mid: f64,
    pub source: Provenance,
    /// The hypothesis held with (numerically) zero slack; whether the
    /// boundary parameters certify the strict property downstream is left
    /// open, so boundary certificates are stamped rather than resolved.
    pub boundary: bool,
}

impl AlphaInterval {
    pub fn contains(&self, alpha: f64) -> bool {
        alpha >= self.alpha_minus && alpha <= self.alpha_plus
    }
}

/// Interval computation outcome: the hypothesis inequality either admits an
/// interval or refuses with the evaluated gap.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum IntervalOutcome {
    Admissible { interval: AlphaInterval, reasons: Vec<Inequality> },
    Refused { reasons: Vec<Inequality> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateVerdict {
    Granted,
    Refused,
}

/// Outcome of a well-posedness pipeline run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub verdict: CertificateVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chosen_alpha: Option<f64>,
    pub reasons: Vec<Inequality>,
    pub provenance: Provenance,
    pub boundary: bool,
}

impl Certificate {
    pub fn granted(&self) -> bool {
        self.verdict == CertificateVerdict::Granted
    }
}

/// Aggregate curvature bound entering the admissible-interval quadratic:
/// `norm_xmu + (c0/4) norm_pmu^2 + norm_xx`.
pub fn curvature_bound(bounds: &DerivativeBounds) -> f64 {
    bounds.norm_xmu + 0.25 * bounds.c0 * bounds.norm_pmu * bounds.norm_pmu + bounds.norm_xx
}

fn boundary_slack(gap: f64, rhs: f64) -> bool {
    (gap - rhs).abs() <= 1e-12 * (1.0 + gap.abs() + rhs.abs())
}

/// Admissible shift interval from derivative bounds.
///
/// With `gap = kappa_xp_lower - norm_pmu/2` and `L = curvature_bound`, the
/// hypothesis is `gap >= sqrt(norm_pp * L)`; when it holds the interval
/// endpoints are the roots of `norm_pp a^2 - 2 gap a + L`, and the midpoint
/// `gap / norm_pp` is always admissible.
pub fn alpha_interval(bounds: &DerivativeBounds) -> Result<IntervalOutcome> {
    bounds.validate()?;
    if bounds.norm_pp <= 0.0 {
        return Err(Error::invalid("alpha_interval: norm_pp must be positive"));
    }
    let curvature = curvature_bound(bounds);
    let gap = bounds.kappa_xp_lower - 0.5 * bounds.norm_pmu;
    let rhs = (bounds.norm_pp * curvature).sqrt();
    let hypothesis = Inequality::geq(
        "kappa_xp_lower - norm_pmu/2 >= sqrt(norm_pp * curvature_bound)",
        gap,
        rhs,
    );
    if !hypothesis.satisfied {
        return Ok(IntervalOutcome::Refused { reasons: vec![hypothesis] });
    }
    let discriminant = (gap * gap - bounds.norm_pp * curvature).max(0.0);
    let sq = discriminant.sqrt();
    let interval = AlphaInterval {
        alpha_minus: (gap - sq) / bounds.norm_pp,
        alpha_plus: (gap + sq) / bounds.norm_pp,
        alpha_mid: gap / bounds.norm_pp,
        source: bounds.provenance,
        boundary: boundary_slack(gap, rhs),
    };
    Ok(IntervalOutcome::Admissible { interval, reasons: vec![hypothesis] })
}

/// The smallest displacement semi-monotonicity constant certified for an
/// anti-monotone cost: the larger of the two closed-form branch bounds.
pub fn semi_constant_from_lambda(lambda: &LambdaParams) -> Result<f64> {
    lambda.validate()?;
    let ratio = lambda.l1.abs() / (2.0 * lambda.l2);
    let branch_kernel = ratio
        + (lambda.l3 / lambda.l2 + lambda.l0 * lambda.l0 / (4.0 * lambda.l2) + ratio * ratio)
            .sqrt();
    let branch_hessian = lambda.l0.abs() / 2.0
        + (lambda.l3 + (lambda.l0 / 2.0).powi(2) + lambda.l2 * ratio * ratio).sqrt();
    Ok(branch_kernel.max(branch_hessian))
}

/// Growth factor `f(lambda)` used by the factored-drift certificate.
///
/// Computed in both displayed groupings; a disagreement beyond 1e-12
/// relative is an internal-consistency error.
pub fn lambda_majorant(lambda: &LambdaParams) -> Result<f64> {
    lambda.validate()?;
    let l0 = lambda.l0;
    let l1 = lambda.l1.abs();
    let l2 = lambda.l2;
    let l3 = lambda.l3;
    let termwise =
        5.0 * l1 / (4.0 * l2) + 1.0 + l3 / (2.0 * l2) + l0 / (4.0 * l2) + 5.0 * l0 / 4.0
            + l3 / 2.0
            + l1 / 4.0;
    let grouped = 1.0
        + 0.5 * (5.0 * l0 / 2.0 + l1 / 2.0 + l3)
        + (0.5 / l2) * (l0 / 2.0 + 5.0 * l1 / 2.0 + l3);
    if (termwise - grouped).abs() > 1e-12 * (1.0 + termwise.abs()) {
        return Err(Error::internal(format!(
            "lambda majorant groupings disagree: {termwise} vs {grouped}"
        )));
    }
    Ok(grouped)
}

/// Certificate for Hamiltonians factored as a linear drift `<A0 x, p>` plus
/// a bounded remainder. `bounds_h0` describes the remainder (its `l2` field
/// is required), `kappa_a0` is the lower eigenvalue bound of the symmetrized
/// drift matrix.
pub fn factored_drift_certificate(
    bounds_h0: &DerivativeBounds,
    kappa_a0: f64,
    lambda: &LambdaParams,
) -> Result<Certificate> {
    // Only the fields the arithmetic touches are validated here, so the
    // degenerate limit `l2 = norm_pp = 0` stays expressible.
    if !(bounds_h0.c0.is_finite() && bounds_h0.c0 > 0.0) {
        return Err(Error::invalid("factored-drift certificate: c0 must be positive"));
    }
    for (name, v) in [("norm_pp", bounds_h0.norm_pp), ("norm_xx", bounds_h0.norm_xx)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!(
                "factored-drift certificate: {name} must be nonnegative"
            )));
        }
    }
    if !kappa_a0.is_finite() {
        return Err(Error::invalid("factored-drift certificate: kappa_a0 must be finite"));
    }
    let l2 = bounds_h0
        .l2
        .ok_or_else(|| Error::invalid("factored-drift certificate needs the l2 bound"))?;
    if !(l2.is_finite() && l2 >= 0.0) {
        return Err(Error::invalid("factored-drift certificate: l2 must be nonnegative"));
    }
    let condition_number = bounds_h0.c0 * bounds_h0.norm_pp;
    let branch_curvature = (3.5 + condition_number.sqrt() / 2.0) * l2
        + (bounds_h0.norm_pp * bounds_h0.norm_xx).sqrt();
    let branch_lambda = (1.5 + lambda_majorant(lambda)?) * l2;
    let required = branch_curvature.max(branch_lambda);
    let reasons = vec![
        Inequality::geq("kappa_a0 >= (7/2 + sqrt(K)/2) l2 + sqrt(norm_pp * norm_xx)", kappa_a0, branch_curvature),
        Inequality::geq("kappa_a0 >= (3/2 + f(lambda)) l2", kappa_a0, branch_lambda),
    ];
    let verdict = if kappa_a0 >= required {
        CertificateVerdict::Granted
    } else {
        CertificateVerdict::Refused
    };
    Ok(Certificate {
        verdict,
        chosen_alpha: None,
        reasons,
        provenance: bounds_h0.provenance,
        boundary: boundary_slack(kappa_a0, required),
    })
}

/// How the semi-monotonicity constant of the terminal cost is supplied.
#[derive(Debug, Clone)]
pub enum SemiMonotonicity {
    /// Constant given directly.
    Constant(f64),
    /// Constant certified from anti-monotonicity parameters.
    FromLambda(LambdaParams),
}

/// Combined pipeline: intersect the admissible shift interval of the
/// Hamiltonian with `[g_semi_alpha, +inf)` and pick the smallest admissible
/// shift.
pub fn wellposedness_certificate(
    h_bounds: &DerivativeBounds,
    g_semi: &SemiMonotonicity,
) -> Result<Certificate> {
    let g_alpha = match g_semi {
        SemiMonotonicity::Constant(a) => {
            if !a.is_finite() {
                return Err(Error::invalid("g_semi_alpha must be finite"));
            }
            *a
        }
        SemiMonotonicity::FromLambda(lambda) => semi_constant_from_lambda(lambda)?,
    };
    match alpha_interval(h_bounds)? {
        IntervalOutcome::Refused { reasons } => Ok(Certificate {
            verdict: CertificateVerdict::Refused,
            chosen_alpha: None,
            reasons,
            provenance: h_bounds.provenance,
            boundary: false,
        }),
        IntervalOutcome::Admissible { interval, mut reasons } => {
            let overlap = Inequality::geq(
                "alpha_plus >= g_semi_alpha",
                interval.alpha_plus,
                g_alpha,
            );
            let granted = overlap.satisfied;
            let boundary = interval.boundary || boundary_slack(interval.alpha_plus, g_alpha);
            reasons.push(overlap);
            if granted {
                Ok(Certificate {
                    verdict: CertificateVerdict::Granted,
                    chosen_alpha: Some(interval.alpha_minus.max(g_alpha)),
                    reasons,
                    provenance: h_bounds.provenance,
                    boundary,
                })
            } else {
                Ok(Certificate {
                    verdict: CertificateVerdict::Refused,
                    chosen_alpha: None,
                    reasons,
                    provenance: h_bounds.provenance,
                    boundary,
                })
            }
        }
    }
}
