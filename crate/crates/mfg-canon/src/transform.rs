//! The canonical transformation `(x, mu, p) -> (x, mu, p - alpha x)`.
//!
//! `transform_hamiltonian` composes the momentum shift into the value and
//! pushes it through every derivative block analytically; `transform_cost`
//! adds the quadratic `(alpha/2)|x|^2`. `value_shift` is the exact pointwise
//! difference between the value functions of the transformed and original
//! problems, including the noise constant.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::models::{Hamiltonian, TerminalCost};

/// Record of a transformation applied to a model, carried by reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransformTag {
    pub alpha: f64,
    pub beta: f64,
    pub beta0: f64,
    pub applied_to: String,
}

impl TransformTag {
    pub fn new(alpha: f64, beta: f64, beta0: f64, applied_to: impl Into<String>) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid("transform: alpha must be finite"));
        }
        if !(beta >= 0.0 && beta0 >= 0.0) {
            return Err(Error::invalid("transform: noise intensities must be nonnegative"));
        }
        Ok(Self { alpha, beta, beta0, applied_to: applied_to.into() })
    }
}

/// Hamiltonian with the momentum argument shifted by `-alpha x`.
pub struct TransformedHamiltonian {
    inner: Arc<dyn Hamiltonian>,
    alpha: f64,
}

impl TransformedHamiltonian {
    fn shifted(&self, x: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        p - x * self.alpha
    }
}

impl Hamiltonian for TransformedHamiltonian {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> f64 {
        self.inner.value(x, mu, &self.shifted(x, p))
    }

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        let q = self.shifted(x, p);
        self.inner.grad_x(x, mu, &q) - self.inner.grad_p(x, mu, &q) * self.alpha
    }

    fn grad_p(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        self.inner.grad_p(x, mu, &self.shifted(x, p))
    }

    fn grad_mu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DVector<f64> {
        self.inner.grad_mu(x, mu, j, &self.shifted(x, p))
    }

    fn hess_xx(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64> {
        let q = self.shifted(x, p);
        let xp = self.inner.hess_xp(x, mu, &q);
        self.inner.hess_xx(x, mu, &q) - (&xp + xp.transpose()) * self.alpha
            + self.inner.hess_pp(x, mu, &q) * (self.alpha * self.alpha)
    }

    fn hess_xp(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64> {
        let q = self.shifted(x, p);
        self.inner.hess_xp(x, mu, &q) - self.inner.hess_pp(x, mu, &q) * self.alpha
    }

    fn hess_pp(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64> {
        self.inner.hess_pp(x, mu, &self.shifted(x, p))
    }

    fn hess_xmu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        let q = self.shifted(x, p);
        self.inner.hess_xmu(x, mu, j, &q) - self.inner.hess_pmu(x, mu, j, &q) * self.alpha
    }

    fn hess_pmu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.inner.hess_pmu(x, mu, j, &self.shifted(x, p))
    }

    // hess_pp is invariant under the shift, so the declared floor carries over.
    fn convexity_c0(&self) -> Option<f64> {
        self.inner.convexity_c0()
    }

    fn name(&self) -> String {
        format!("{}+shift({})", self.inner.name(), self.alpha)
    }
}

/// Build `H_alpha(x, mu, p) = H(x, mu, p - alpha x)` with analytic
/// derivative push-through.
pub fn transform_hamiltonian(h: Arc<dyn Hamiltonian>, alpha: f64) -> Arc<dyn Hamiltonian> {
    Arc::new(TransformedHamiltonian { inner: h, alpha })
}

/// Terminal cost with the quadratic `(alpha/2)|x|^2` added.
pub struct TransformedCost {
    inner: Arc<dyn TerminalCost>,
    alpha: f64,
}

impl TerminalCost for TransformedCost {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> f64 {
        self.inner.value(x, mu) + 0.5 * self.alpha * x.dot(x)
    }

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> DVector<f64> {
        self.inner.grad_x(x, mu) + x * self.alpha
    }

    fn grad_mu(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, j: usize) -> DVector<f64> {
        self.inner.grad_mu(x, mu, j)
    }

    fn hess_xx(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> DMatrix<f64> {
        self.inner.hess_xx(x, mu) + DMatrix::identity(self.dim(), self.dim()) * self.alpha
    }

    fn hess_xmu(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, j: usize) -> DMatrix<f64> {
        self.inner.hess_xmu(x, mu, j)
    }

    fn name(&self) -> String {
        format!("{}+quad({})", self.inner.name(), self.alpha)
    }
}

/// Build `G_alpha(x, mu) = G(x, mu) + (alpha/2)|x|^2`.
pub fn transform_cost(g: Arc<dyn TerminalCost>, alpha: f64) -> Arc<dyn TerminalCost> {
    Arc::new(TransformedCost { inner: g, alpha })
}

/// Pointwise difference between the transformed and original value
/// functions: `(alpha/2)|x|^2 - ((beta0^2 + beta^2) alpha d / 2)(t - T)`.
///
/// The additive noise constant lives entirely here; the transformed
/// Hamiltonian itself stays noise-agnostic.
pub fn value_shift(
    alpha: f64,
    beta: f64,
    beta0: f64,
    dim: usize,
    t: f64,
    t_final: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    if !(t >= 0.0 && t <= t_final) {
        return Err(Error::invalid(format!(
            "value_shift: t = {t} outside [0, {t_final}]"
        )));
    }
    if !alpha.is_finite() {
        return Err(Error::invalid("value_shift: alpha must be finite"));
    }
    let noise = (beta0 * beta0 + beta * beta) * alpha * dim as f64 / 2.0;
    Ok(0.5 * alpha * x.dot(x) - noise * (t - t_final))
}
