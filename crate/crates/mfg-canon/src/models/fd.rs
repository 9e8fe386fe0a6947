//! Finite-difference derivative bundles.
//!
//! Central differences of the *value* function only, so the results are an
//! independent oracle for any analytic derivative code. Measure derivatives
//! use the particle representation: shifting support point `j` by `±h` and
//! scaling by `N` recovers the kernel object stored by the models. Second
//! derivatives are nested central differences of the value.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measures::EmpiricalMeasure;

use super::{Hamiltonian, TerminalCost};

/// Step sizes for the finite-difference oracle. Every step is additionally
/// scaled by `1 + |coordinate|`. Second derivatives default to a larger step
/// because the nested stencil amplifies rounding by `1/h^2`.
#[derive(Debug, Clone, Copy)]
pub struct FdOptions {
    pub grad_step: f64,
    pub hess_step: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self { grad_step: 1e-5, hess_step: 1e-4 }
    }
}

impl FdOptions {
    /// Same step for first and second derivatives; used by the step-sweep
    /// consistency tests.
    pub fn uniform(step: f64) -> Self {
        Self { grad_step: step, hess_step: step }
    }
}

/// All finite-difference derivative blocks of a Hamiltonian at one point.
pub struct HamiltonianFdBundle {
    pub grad_x: DVector<f64>,
    pub grad_p: DVector<f64>,
    pub grad_mu: Vec<DVector<f64>>,
    pub hess_xx: DMatrix<f64>,
    pub hess_xp: DMatrix<f64>,
    pub hess_pp: DMatrix<f64>,
    pub hess_xmu: Vec<DMatrix<f64>>,
    pub hess_pmu: Vec<DMatrix<f64>>,
}

/// All finite-difference derivative blocks of a terminal cost at one point.
pub struct CostFdBundle {
    pub grad_x: DVector<f64>,
    pub grad_mu: Vec<DVector<f64>>,
    pub hess_xx: DMatrix<f64>,
    pub hess_xmu: Vec<DMatrix<f64>>,
}

fn check_finite(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::numerical("non-finite model evaluation in finite differencing"))
    }
}

fn scaled(step: f64, coord: f64) -> f64 {
    step * (1.0 + coord.abs())
}

/// Perturbation slots of a value function `V(x, mu, p)`.
#[derive(Clone, Copy, PartialEq)]
enum Slot {
    X,
    P,
    /// Support point `j` of the measure.
    Mu(usize),
}

struct Probe<'a> {
    value: &'a dyn Fn(&DVector<f64>, &EmpiricalMeasure, &DVector<f64>) -> f64,
    x: &'a DVector<f64>,
    mu: &'a EmpiricalMeasure,
    p: &'a DVector<f64>,
}

impl Probe<'_> {
    fn coord(&self, slot: Slot, k: usize) -> f64 {
        match slot {
            Slot::X => self.x[k],
            Slot::P => self.p[k],
            Slot::Mu(j) => self.mu.point(j)[k],
        }
    }

    /// Evaluate with two coordinate offsets applied (slots may coincide).
    fn eval(&self, a: (Slot, usize, f64), b: (Slot, usize, f64)) -> Result<f64> {
        let mut x = self.x.clone();
        let mut p = self.p.clone();
        let mut mu = self.mu.clone();
        for (slot, k, delta) in [a, b] {
            match slot {
                Slot::X => x[k] += delta,
                Slot::P => p[k] += delta,
                Slot::Mu(j) => {
                    let mut pt = mu.point(j).clone();
                    pt[k] += delta;
                    mu = mu.with_point(j, pt);
                }
            }
        }
        check_finite((self.value)(&x, &mu, &p))
    }

    /// Central first difference in one coordinate. `scale` is the kernel
    /// scaling (N for measure slots, 1 otherwise).
    fn first(&self, slot: Slot, k: usize, step: f64, scale: f64) -> Result<f64> {
        let h = scaled(step, self.coord(slot, k));
        let plus = self.eval((slot, k, h), (slot, k, 0.0))?;
        let minus = self.eval((slot, k, -h), (slot, k, 0.0))?;
        Ok(scale * (plus - minus) / (2.0 * h))
    }

    fn gradient(&self, slot: Slot, n: usize, step: f64, scale: f64) -> Result<DVector<f64>> {
        let mut g = DVector::zeros(n);
        for k in 0..n {
            g[k] = self.first(slot, k, step, scale)?;
        }
        Ok(g)
    }

    /// Nested central difference `∂²V/(∂a_i ∂b_j)` with kernel scaling.
    fn second(
        &self,
        sa: Slot,
        i: usize,
        sb: Slot,
        j: usize,
        step: f64,
        scale: f64,
    ) -> Result<f64> {
        let ha = scaled(step, self.coord(sa, i));
        let hb = scaled(step, self.coord(sb, j));
        let pp = self.eval((sa, i, ha), (sb, j, hb))?;
        let pm = self.eval((sa, i, ha), (sb, j, -hb))?;
        let mp = self.eval((sa, i, -ha), (sb, j, hb))?;
        let mm = self.eval((sa, i, -ha), (sb, j, -hb))?;
        Ok(scale * (pp - pm - mp + mm) / (4.0 * ha * hb))
    }

    /// Matrix of nested differences with rows in slot `sa`, columns in `sb`.
    fn hessian(&self, sa: Slot, sb: Slot, rows: usize, cols: usize, step: f64, scale: f64) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self.second(sa, i, sb, j, step, scale)?;
            }
        }
        Ok(m)
    }
}

/// Finite-difference bundle for a Hamiltonian at `(x, mu, p)`.
pub fn fd_hamiltonian(
    model: &dyn Hamiltonian,
    x: &DVector<f64>,
    mu: &EmpiricalMeasure,
    p: &DVector<f64>,
    opts: FdOptions,
) -> Result<HamiltonianFdBundle> {
    if !(opts.grad_step > 0.0 && opts.hess_step > 0.0) {
        return Err(Error::invalid("finite-difference steps must be positive"));
    }
    let d = model.dim();
    let n = mu.len() as f64;
    let value = |x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>| model.value(x, mu, p);
    let probe = Probe { value: &value, x, mu, p };

    let mut grad_mu = Vec::with_capacity(mu.len());
    let mut hess_xmu = Vec::with_capacity(mu.len());
    let mut hess_pmu = Vec::with_capacity(mu.len());
    for j in 0..mu.len() {
        grad_mu.push(probe.gradient(Slot::Mu(j), d, opts.grad_step, n)?);
        hess_xmu.push(probe.hessian(Slot::X, Slot::Mu(j), d, d, opts.hess_step, n)?);
        hess_pmu.push(probe.hessian(Slot::P, Slot::Mu(j), d, d, opts.hess_step, n)?);
    }

    Ok(HamiltonianFdBundle {
        grad_x: probe.gradient(Slot::X, d, opts.grad_step, 1.0)?,
        grad_p: probe.gradient(Slot::P, d, opts.grad_step, 1.0)?,
        grad_mu,
        hess_xx: probe.hessian(Slot::X, Slot::X, d, d, opts.hess_step, 1.0)?,
        hess_xp: probe.hessian(Slot::X, Slot::P, d, d, opts.hess_step, 1.0)?,
        hess_pp: probe.hessian(Slot::P, Slot::P, d, d, opts.hess_step, 1.0)?,
        hess_xmu,
        hess_pmu,
    })
}

/// Finite-difference bundle for a terminal cost at `(x, mu)`.
pub fn fd_cost(
    model: &dyn TerminalCost,
    x: &DVector<f64>,
    mu: &EmpiricalMeasure,
    opts: FdOptions,
) -> Result<CostFdBundle> {
    if !(opts.grad_step > 0.0 && opts.hess_step > 0.0) {
        return Err(Error::invalid("finite-difference steps must be positive"));
    }
    let d = model.dim();
    let n = mu.len() as f64;
    let dummy_p = DVector::zeros(d);
    let value = |x: &DVector<f64>, mu: &EmpiricalMeasure, _p: &DVector<f64>| model.value(x, mu);
    let probe = Probe { value: &value, x, mu, p: &dummy_p };

    let mut grad_mu = Vec::with_capacity(mu.len());
    let mut hess_xmu = Vec::with_capacity(mu.len());
    for j in 0..mu.len() {
        grad_mu.push(probe.gradient(Slot::Mu(j), d, opts.grad_step, n)?);
        hess_xmu.push(probe.hessian(Slot::X, Slot::Mu(j), d, d, opts.hess_step, n)?);
    }

    Ok(CostFdBundle {
        grad_x: probe.gradient(Slot::X, d, opts.grad_step, 1.0)?,
        grad_mu,
        hess_xx: probe.hessian(Slot::X, Slot::X, d, d, opts.hess_step, 1.0)?,
        hess_xmu,
    })
}
