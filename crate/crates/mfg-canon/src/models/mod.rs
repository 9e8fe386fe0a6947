//! Evaluable Hamiltonian and terminal-cost models with analytic derivatives.
//!
//! Measure derivatives are represented as kernels over the support points of
//! the empirical measure: for a functional `F` of the particle list,
//! `grad_mu(x, mu, j, ..)` stores the N-independent object `∂μF(mu, x_j)`,
//! i.e. `N` times the partial derivative in particle `j`. All quadrature over
//! the measure then uses weight `1/N` per support point.
//!
//! Kernel matrix conventions (d×d blocks):
//! - `hess_xmu` has rows indexed by x-components and columns by the
//!   direction of the perturbed support point, so `hess_xmu * v(x_j)` is an
//!   x-indexed vector.
//! - `hess_pmu` has rows indexed by p-components, so
//!   `hess_pmu * v(x_j)` can be hit with `hess_pp^{-1/2}`.

pub mod bounds;
pub mod builtins;
pub mod fd;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::measures::EmpiricalMeasure;

/// Evaluable model of `H(x, mu, p)` with first and second derivatives.
pub trait Hamiltonian: Send + Sync {
    /// State dimension the model is defined for.
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> f64;

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64>;

    fn grad_p(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64>;

    /// Measure-derivative kernel evaluated at support point `j` of `mu`.
    fn grad_mu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DVector<f64>;

    fn hess_xx(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64>;

    /// Mixed Hessian with entry `(a, b) = ∂²H/∂x_a∂p_b`.
    fn hess_xp(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64>;

    fn hess_pp(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64>;

    /// Mixed state/measure kernel at support point `j` with entry
    /// `(a, b) = ∂²H/(∂x_a ∂μ_b)`; rows are x-components (see module docs).
    fn hess_xmu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DMatrix<f64>;

    /// Mixed momentum/measure kernel at support point `j`, rows are
    /// p-components.
    fn hess_pmu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DMatrix<f64>;

    /// Declared convexity constant: `hess_pp >= (1/c0) I` everywhere.
    fn convexity_c0(&self) -> Option<f64> {
        None
    }

    /// Stable name used in reports.
    fn name(&self) -> String {
        "hamiltonian".to_string()
    }
}

/// Evaluable model of a terminal cost `G(x, mu)` with derivatives.
pub trait TerminalCost: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> f64;

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> DVector<f64>;

    fn grad_mu(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, j: usize) -> DVector<f64>;

    fn hess_xx(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> DMatrix<f64>;

    /// Mixed state/measure kernel at support point `j`, rows are
    /// x-components.
    fn hess_xmu(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, j: usize) -> DMatrix<f64>;

    fn name(&self) -> String {
        "cost".to_string()
    }
}

/// `hess_xmu` of a Hamiltonian queried by support *point* rather than index;
/// errors when the point is not in the support.
pub fn hamiltonian_xmu_at_point(
    model: &dyn Hamiltonian,
    x: &DVector<f64>,
    mu: &EmpiricalMeasure,
    point: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let j = mu.support_index(point)?;
    Ok(model.hess_xmu(x, mu, j, p))
}

/// `hess_pmu` by support point; errors off support.
pub fn hamiltonian_pmu_at_point(
    model: &dyn Hamiltonian,
    x: &DVector<f64>,
    mu: &EmpiricalMeasure,
    point: &DVector<f64>,
    p: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let j = mu.support_index(point)?;
    Ok(model.hess_pmu(x, mu, j, p))
}

/// `hess_xmu` of a cost by support point; errors off support.
pub fn cost_xmu_at_point(
    model: &dyn TerminalCost,
    x: &DVector<f64>,
    mu: &EmpiricalMeasure,
    point: &DVector<f64>,
) -> Result<DMatrix<f64>> {
    let j = mu.support_index(point)?;
    Ok(model.hess_xmu(x, mu, j))
}

pub use bounds::{estimate_hamiltonian_bounds, DerivativeBounds, Provenance};
pub use builtins::{
    build_cost, build_hamiltonian, cost_registry, hamiltonian_registry, ConcaveQuadraticCost,
    LqHamiltonian, MeanFieldLqHamiltonian, PxCoupledHamiltonian, QuadraticCost,
};
