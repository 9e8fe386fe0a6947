//! Scalar derivative bounds feeding the certificate arithmetic.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, sym_eigenvalues, sym_part};
use crate::measures::EmpiricalMeasure;

use super::Hamiltonian;

/// Whether bound values were supplied by the user or estimated by sampling.
/// Sampled infima over-estimate and sampled suprema under-estimate, so
/// certificates computed from sampled bounds are stamped non-rigorous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Declared,
    Sampled,
}

/// Scalar bounds on the second derivatives of a Hamiltonian.
///
/// `kappa_xp_lower` bounds the smallest eigenvalue of the symmetrized mixed
/// Hessian from below; the `norm_*` fields are suprema of 2-matrix norms;
/// `l2`, when present, is a single constant dominating the mixed and
/// momentum blocks of the drift-free part of the Hamiltonian.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DerivativeBounds {
    pub c0: f64,
    pub kappa_xp_lower: f64,
    pub norm_pp: f64,
    pub norm_xx: f64,
    pub norm_pmu: f64,
    pub norm_xmu: f64,
    #[serde(default)]
    pub l2: Option<f64>,
    pub provenance: Provenance,
}

impl DerivativeBounds {
    pub fn declared(
        c0: f64,
        kappa_xp_lower: f64,
        norm_pp: f64,
        norm_xx: f64,
        norm_pmu: f64,
        norm_xmu: f64,
        l2: Option<f64>,
    ) -> Result<Self> {
        let b = Self {
            c0,
            kappa_xp_lower,
            norm_pp,
            norm_xx,
            norm_pmu,
            norm_xmu,
            l2,
            provenance: Provenance::Declared,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0.is_finite() && self.c0 > 0.0) {
            return Err(Error::invalid("bounds: c0 must be positive and finite"));
        }
        if !self.kappa_xp_lower.is_finite() {
            return Err(Error::invalid("bounds: kappa_xp_lower must be finite"));
        }
        for (name, v) in [
            ("norm_pp", self.norm_pp),
            ("norm_xx", self.norm_xx),
            ("norm_pmu", self.norm_pmu),
            ("norm_xmu", self.norm_xmu),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("bounds: {name} must be nonnegative")));
            }
        }
        if self.norm_pp < 1.0 / self.c0 {
            return Err(Error::invalid(format!(
                "bounds: norm_pp = {} is below the convexity floor 1/c0 = {}",
                self.norm_pp,
                1.0 / self.c0
            )));
        }
        if let Some(l2) = self.l2 {
            if !(l2.is_finite() && l2 >= 0.0) {
                return Err(Error::invalid("bounds: l2 must be nonnegative"));
            }
            let dominated = [
                ("norm_pp", self.norm_pp),
                ("norm_pmu", self.norm_pmu),
                ("norm_xmu", self.norm_xmu),
                ("|kappa_xp_lower|", self.kappa_xp_lower.abs()),
            ];
            for (name, v) in dominated {
                if l2 < v {
                    return Err(Error::invalid(format!(
                        "bounds: l2 = {l2} does not dominate {name} = {v}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// One evaluation point for the sampled estimator.
pub type BoundsSample = (DVector<f64>, EmpiricalMeasure, DVector<f64>);

/// Estimate `DerivativeBounds` by sampling evaluation points.
///
/// The result is a heuristic: minima over samples for the eigenvalue bound,
/// maxima for the norms. A declared convexity constant is certified on every
/// sample (`λ_min(hess_pp) >= 1/c0 - 1e-10`); without one, `c0` is estimated
/// from the worst sampled momentum Hessian.
pub fn estimate_hamiltonian_bounds<I>(model: &dyn Hamiltonian, samples: I) -> Result<DerivativeBounds>
where
    I: IntoIterator<Item = BoundsSample>,
{
    let mut count = 0usize;
    let mut kappa = f64::INFINITY;
    let mut norm_pp: f64 = 0.0;
    let mut norm_xx: f64 = 0.0;
    let mut norm_pmu: f64 = 0.0;
    let mut norm_xmu: f64 = 0.0;
    let mut min_pp_eig = f64::INFINITY;

    for (x, mu, p) in samples {
        count += 1;
        if x.len() != model.dim() || p.len() != model.dim() || mu.dim() != model.dim() {
            return Err(Error::invalid("bounds sampler produced a dimension mismatch"));
        }
        let hxp = model.hess_xp(&x, &mu, &p);
        let hpp = model.hess_pp(&x, &mu, &p);
        let hxx = model.hess_xx(&x, &mu, &p);
        for m in [&hxp, &hpp, &hxx] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::numerical("non-finite Hessian while sampling bounds"));
            }
        }
        kappa = kappa.min(sym_eigenvalues(&sym_part(&hxp))[0]);
        min_pp_eig = min_pp_eig.min(sym_eigenvalues(&hpp)[0]);
        norm_pp = norm_pp.max(spectral_norm(&hpp));
        norm_xx = norm_xx.max(spectral_norm(&hxx));
        for j in 0..mu.len() {
            norm_pmu = norm_pmu.max(spectral_norm(&model.hess_pmu(&x, &mu, j, &p)));
            norm_xmu = norm_xmu.max(spectral_norm(&model.hess_xmu(&x, &mu, j, &p)));
        }
    }
    if count == 0 {
        return Err(Error::invalid("bounds estimation needs at least one sample"));
    }

    let c0 = match model.convexity_c0() {
        Some(c0) => {
            if min_pp_eig < 1.0 / c0 - 1e-10 {
                return Err(Error::invalid(format!(
                    "declared c0 = {c0} violated: sampled λ_min(hess_pp) = {min_pp_eig}"
                )));
            }
            c0
        }
        None => {
            if min_pp_eig <= 0.0 {
                return Err(Error::numerical(format!(
                    "sampled hess_pp is not positive definite (λ_min = {min_pp_eig})"
                )));
            }
            1.0 / min_pp_eig
        }
    };

    let b = DerivativeBounds {
        c0,
        kappa_xp_lower: kappa,
        // The convexity floor must hold for the record to validate, even if
        // sampling never saw the extremal point.
        norm_pp: norm_pp.max(1.0 / c0),
        norm_xx,
        norm_pmu,
        norm_xmu,
        l2: None,
        provenance: Provenance::Sampled,
    };
    b.validate()?;
    Ok(b)
}

/// Smallest sampled value of `grad_p(x,mu,p)·p - H(x,mu,p)`. This is the
/// coercivity-style quantity some solvability hypotheses bound from below;
/// it plays no role in the certificate formulas and is reported only as an
/// optional diagnostic.
pub fn sampled_duality_slack<I>(model: &dyn Hamiltonian, samples: I) -> Result<f64>
where
    I: IntoIterator<Item = BoundsSample>,
{
    let mut slack = f64::INFINITY;
    let mut count = 0usize;
    for (x, mu, p) in samples {
        count += 1;
        let v = model.grad_p(&x, &mu, &p).dot(&p) - model.value(&x, &mu, &p);
        if !v.is_finite() {
            return Err(Error::numerical("non-finite evaluation while sampling duality slack"));
        }
        slack = slack.min(v);
    }
    if count == 0 {
        return Err(Error::invalid("duality slack sampling needs at least one sample"));
    }
    Ok(slack)
}
