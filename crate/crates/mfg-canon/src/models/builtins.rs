//! Built-in model catalog and the name registry the CLI dispatches through.
//!
//! Every catalog entry is a small analytic model with exact derivative code:
//!
//! - `H_lq`:   `(1/2)<Pp,p> + (1/2)<Qx,x> + <Rx,p>` with constant matrices
//! - `H_mf`:   `(1/2)|p|^2 + c p·mean(mu) + (q/2)|x - mean(mu)|^2`
//! - `H_pxc`:  any base Hamiltonian plus `alpha0 p·x`
//! - `G_quad`: `(a/2)|x|^2 + b x·mean(mu) + (e/2)|x - mean(mu)|^2`
//! - `G_anti`: `-(a/2)|x|^2`, `a > 0`

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, sym_part};
use crate::measures::EmpiricalMeasure;

use super::{Hamiltonian, TerminalCost};

/// Linear-quadratic Hamiltonian `(1/2)<Pp,p> + (1/2)<Qx,x> + <Rx,p>`.
/// `P` and `Q` are symmetrized on construction; `P` must be positive
/// definite and yields the declared convexity constant `c0 = 1/λ_min(P)`.
pub struct LqHamiltonian {
    p_mat: DMatrix<f64>,
    q_mat: DMatrix<f64>,
    r_mat: DMatrix<f64>,
    c0: f64,
    dim: usize,
}

impl LqHamiltonian {
    pub fn new(p_mat: DMatrix<f64>, q_mat: DMatrix<f64>, r_mat: DMatrix<f64>) -> Result<Self> {
        let dim = p_mat.nrows();
        for (name, m) in [("P", &p_mat), ("Q", &q_mat), ("R", &r_mat)] {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::invalid(format!(
                    "H_lq: matrix {name} must be {dim}x{dim}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let p_sym = sym_part(&p_mat);
        let min_ev = sym_eigenvalues(&p_sym)[0];
        if min_ev <= 0.0 {
            return Err(Error::invalid(format!(
                "H_lq: P must be positive definite (min eigenvalue {min_ev:.6e})"
            )));
        }
        Ok(Self {
            p_mat: p_sym,
            q_mat: sym_part(&q_mat),
            r_mat,
            c0: 1.0 / min_ev,
            dim,
        })
    }

    /// `(1/2)|p|^2 + (q/2)|x|^2 + kappa x·p` in dimension `dim`.
    pub fn isotropic(dim: usize, q: f64, kappa: f64) -> Self {
        let id = DMatrix::identity(dim, dim);
        Self::new(id.clone(), &id * q, &id * kappa).expect("identity P is positive definite")
    }
}

impl Hamiltonian for LqHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>, _mu: &EmpiricalMeasure, p: &DVector<f64>) -> f64 {
        0.5 * (&self.p_mat * p).dot(p) + 0.5 * (&self.q_mat * x).dot(x) + (&self.r_mat * x).dot(p)
    }

    fn grad_x(&self, x: &DVector<f64>, _mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        &self.q_mat * x + self.r_mat.transpose() * p
    }

    fn grad_p(&self, x: &DVector<f64>, _mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        &self.p_mat * p + &self.r_mat * x
    }

    fn grad_mu(
        &self,
        _x: &DVector<f64>,
        _mu: &EmpiricalMeasure,
        _j: usize,
        _p: &DVector<f64>,
    ) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn hess_xx(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
        self.q_mat.clone()
    }

    fn hess_xp(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
        self.r_mat.transpose()
    }

    fn hess_pp(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
        self.p_mat.clone()
    }

    fn hess_xmu(
        &self,
        _x: &DVector<f64>,
        _mu: &EmpiricalMeasure,
        _j: usize,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn hess_pmu(
        &self,
        _x: &DVector<f64>,
        _mu: &EmpiricalMeasure,
        _j: usize,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn convexity_c0(&self) -> Option<f64> {
        Some(self.c0)
    }

    fn name(&self) -> String {
        "H_lq".to_string()
    }
}

/// Mean-field coupled Hamiltonian
/// `(1/2)|p|^2 + c p·mean(mu) + (q/2)|x - mean(mu)|^2`.
pub struct MeanFieldLqHamiltonian {
    c: f64,
    q: f64,
    dim: usize,
}

impl MeanFieldLqHamiltonian {
    pub fn new(dim: usize, c: f64, q: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("H_mf: dimension must be at least 1"));
        }
        if !c.is_finite() || !q.is_finite() {
            return Err(Error::invalid("H_mf: parameters must be finite"));
        }
        Ok(Self { c, q, dim })
    }
}

impl Hamiltonian for MeanFieldLqHamiltonian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> f64 {
        let m = mu.mean();
        let dx = x - &m;
        0.5 * p.dot(p) + self.c * p.dot(&m) + 0.5 * self.q * dx.dot(&dx)
    }

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DVector<f64> {
        (x - mu.mean()) * self.q
    }

    fn grad_p(&self, _x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        p + mu.mean() * self.c
    }

    fn grad_mu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        _j: usize,
        p: &DVector<f64>,
    ) -> DVector<f64> {
        p * self.c - (x - mu.mean()) * self.q
    }

    fn hess_xx(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.q
    }

    fn hess_xp(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn hess_pp(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }

    fn hess_xmu(
        &self,
        _x: &DVector<f64>,
        _mu: &EmpiricalMeasure,
        _j: usize,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * (-self.q)
    }

    fn hess_pmu(
        &self,
        _x: &DVector<f64>,
        _mu: &EmpiricalMeasure,
        _j: usize,
        _p: &DVector<f64>,
    ) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * self.c
    }

    fn convexity_c0(&self) -> Option<f64> {
        Some(1.0)
    }

    fn name(&self) -> String {
        "H_mf".to_string()
    }
}

/// A base Hamiltonian with an added `alpha0 p·x` cross term. The cross term
/// only touches the value, the first derivatives and `hess_xp`.
pub struct PxCoupledHamiltonian {
    base: Arc<dyn Hamiltonian>,
    alpha0: f64,
}

impl PxCoupledHamiltonian {
    pub fn new(base: Arc<dyn Hamiltonian>, alpha0: f64) -> Result<Self> {
        if !alpha0.is_finite() {
            return Err(Error::invalid("H_pxc: alpha0 must be finite"));
        }
        Ok(Self { base, alpha0 })
    }
}

impl Hamiltonian for PxCoupledHamiltonian {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> f64 {
        self.base.value(x, mu, p) + self.alpha0 * p.dot(x)
    }

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        self.base.grad_x(x, mu, p) + p * self.alpha0
    }

    fn grad_p(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
        self.base.grad_p(x, mu, p) + x * self.alpha0
    }

    fn grad_mu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DVector<f64> {
        self.base.grad_mu(x, mu, j, p)
    }

    fn hess_xx(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64> {
        self.base.hess_xx(x, mu, p)
    }

    fn hess_xp(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64> {
        self.base.hess_xp(x, mu, p) + DMatrix::identity(self.dim(), self.dim()) * self.alpha0
    }

    fn hess_pp(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, p: &DVector<f64>) -> DMatrix<f64> {
        self.base.hess_pp(x, mu, p)
    }

    fn hess_xmu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.base.hess_xmu(x, mu, j, p)
    }

    fn hess_pmu(
        &self,
        x: &DVector<f64>,
        mu: &EmpiricalMeasure,
        j: usize,
        p: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.base.hess_pmu(x, mu, j, p)
    }

    fn convexity_c0(&self) -> Option<f64> {
        self.base.convexity_c0()
    }

    fn name(&self) -> String {
        format!("H_pxc({})", self.base.name())
    }
}

/// Quadratic cost `(a/2)|x|^2 + b x·mean(mu) + (e/2)|x - mean(mu)|^2`.
pub struct QuadraticCost {
    a: f64,
    b: f64,
    e: f64,
    dim: usize,
}

impl QuadraticCost {
    pub fn new(dim: usize, a: f64, b: f64, e: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("G_quad: dimension must be at least 1"));
        }
        if ![a, b, e].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("G_quad: parameters must be finite"));
        }
        Ok(Self { a, b, e, dim })
    }

    /// Plain `(a/2)|x|^2`.
    pub fn isotropic(dim: usize, a: f64) -> Self {
        Self::new(dim, a, 0.0, 0.0).expect("finite parameters")
    }
}

impl TerminalCost for QuadraticCost {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> f64 {
        let m = mu.mean();
        let dx = x - &m;
        0.5 * self.a * x.dot(x) + self.b * x.dot(&m) + 0.5 * self.e * dx.dot(&dx)
    }

    fn grad_x(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> DVector<f64> {
        let m = mu.mean();
        x * self.a + &m * self.b + (x - &m) * self.e
    }

    fn grad_mu(&self, x: &DVector<f64>, mu: &EmpiricalMeasure, _j: usize) -> DVector<f64> {
        x * self.b - (x - mu.mean()) * self.e
    }

    fn hess_xx(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * (self.a + self.e)
    }

    fn hess_xmu(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _j: usize) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * (self.b - self.e)
    }

    fn name(&self) -> String {
        "G_quad".to_string()
    }
}

/// Concave quadratic cost `-(a/2)|x|^2` with `a > 0`; the canonical
/// non-monotone terminal datum.
pub struct ConcaveQuadraticCost {
    a: f64,
    dim: usize,
}

impl ConcaveQuadraticCost {
    pub fn new(dim: usize, a: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("G_anti: dimension must be at least 1"));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid("G_anti: parameter a must be positive"));
        }
        Ok(Self { a, dim })
    }
}

impl TerminalCost for ConcaveQuadraticCost {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>, _mu: &EmpiricalMeasure) -> f64 {
        -0.5 * self.a * x.dot(x)
    }

    fn grad_x(&self, x: &DVector<f64>, _mu: &EmpiricalMeasure) -> DVector<f64> {
        x * (-self.a)
    }

    fn grad_mu(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _j: usize) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn hess_xx(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim) * (-self.a)
    }

    fn hess_xmu(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _j: usize) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }

    fn name(&self) -> String {
        "G_anti".to_string()
    }
}

// ---------------------------------------------------------------------------
// Name registry
// ---------------------------------------------------------------------------

type HamiltonianBuilder = fn(&Value) -> Result<Arc<dyn Hamiltonian>>;
type CostBuilder = fn(&Value) -> Result<Arc<dyn TerminalCost>>;

fn param_f64(params: &Value, key: &str) -> Result<f64> {
    params
        .get(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| Error::invalid(format!("missing or non-numeric parameter '{key}'")))
}

fn param_f64_or(params: &Value, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| Error::invalid(format!("parameter '{key}' must be numeric"))),
    }
}

fn param_dim(params: &Value) -> Result<usize> {
    let d = params
        .get("d")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::invalid("missing integer parameter 'd'"))?;
    if d == 0 {
        return Err(Error::invalid("parameter 'd' must be at least 1"));
    }
    Ok(d as usize)
}

/// Parse a row-major matrix; a bare scalar `s` is shorthand for `s * I`.
fn param_matrix(params: &Value, key: &str, dim: usize, default: f64) -> Result<DMatrix<f64>> {
    match params.get(key) {
        None | Some(Value::Null) => Ok(DMatrix::identity(dim, dim) * default),
        Some(Value::Number(n)) => {
            let s = n
                .as_f64()
                .ok_or_else(|| Error::invalid(format!("parameter '{key}' must be numeric")))?;
            Ok(DMatrix::identity(dim, dim) * s)
        }
        Some(Value::Array(rows)) => {
            if rows.len() != dim {
                return Err(Error::invalid(format!(
                    "matrix '{key}' must have {dim} rows, got {}",
                    rows.len()
                )));
            }
            let mut m = DMatrix::zeros(dim, dim);
            for (i, row) in rows.iter().enumerate() {
                let row = row.as_array().ok_or_else(|| {
                    Error::invalid(format!("matrix '{key}' row {i} must be an array"))
                })?;
                if row.len() != dim {
                    return Err(Error::invalid(format!(
                        "matrix '{key}' row {i} must have {dim} entries, got {}",
                        row.len()
                    )));
                }
                for (j, v) in row.iter().enumerate() {
                    m[(i, j)] = v.as_f64().ok_or_else(|| {
                        Error::invalid(format!("matrix '{key}' entry ({i},{j}) must be numeric"))
                    })?;
                }
            }
            Ok(m)
        }
        Some(_) => Err(Error::invalid(format!(
            "parameter '{key}' must be a scalar or a row-major matrix"
        ))),
    }
}

fn build_h_lq(params: &Value) -> Result<Arc<dyn Hamiltonian>> {
    let dim = param_dim(params)?;
    let p = param_matrix(params, "P", dim, 1.0)?;
    let q = param_matrix(params, "Q", dim, 0.0)?;
    let r = param_matrix(params, "R", dim, 0.0)?;
    Ok(Arc::new(LqHamiltonian::new(p, q, r)?))
}

fn build_h_mf(params: &Value) -> Result<Arc<dyn Hamiltonian>> {
    let dim = param_dim(params)?;
    let c = param_f64_or(params, "c", 0.0)?;
    let q = param_f64_or(params, "q", 0.0)?;
    Ok(Arc::new(MeanFieldLqHamiltonian::new(dim, c, q)?))
}

fn build_h_pxc(params: &Value) -> Result<Arc<dyn Hamiltonian>> {
    let alpha0 = param_f64(params, "alpha0")?;
    let base_spec = params
        .get("base")
        .ok_or_else(|| Error::invalid("H_pxc needs a 'base' model spec"))?;
    let kind = base_spec
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::invalid("H_pxc base spec needs a 'type'"))?;
    let base_params = base_spec.get("params").cloned().unwrap_or(Value::Null);
    let base = build_hamiltonian(kind, &base_params)?;
    Ok(Arc::new(PxCoupledHamiltonian::new(base, alpha0)?))
}

fn build_g_quad(params: &Value) -> Result<Arc<dyn TerminalCost>> {
    let dim = param_dim(params)?;
    let a = param_f64_or(params, "a", 0.0)?;
    let b = param_f64_or(params, "b", 0.0)?;
    let e = param_f64_or(params, "e", 0.0)?;
    Ok(Arc::new(QuadraticCost::new(dim, a, b, e)?))
}

fn build_g_anti(params: &Value) -> Result<Arc<dyn TerminalCost>> {
    let dim = param_dim(params)?;
    let a = param_f64(params, "a")?;
    Ok(Arc::new(ConcaveQuadraticCost::new(dim, a)?))
}

/// Registered Hamiltonian builders, keyed by catalog name.
pub fn hamiltonian_registry() -> BTreeMap<&'static str, HamiltonianBuilder> {
    BTreeMap::from([
        ("H_lq", build_h_lq as HamiltonianBuilder),
        ("H_mf", build_h_mf as HamiltonianBuilder),
        ("H_pxc", build_h_pxc as HamiltonianBuilder),
    ])
}

/// Registered terminal-cost builders, keyed by catalog name.
pub fn cost_registry() -> BTreeMap<&'static str, CostBuilder> {
    BTreeMap::from([
        ("G_quad", build_g_quad as CostBuilder),
        ("G_anti", build_g_anti as CostBuilder),
    ])
}

/// Build a Hamiltonian from a registered name and its parameter record.
pub fn build_hamiltonian(name: &str, params: &Value) -> Result<Arc<dyn Hamiltonian>> {
    match hamiltonian_registry().get(name) {
        Some(builder) => builder(params),
        None => Err(Error::invalid(format!(
            "unknown Hamiltonian model '{name}' (known: {})",
            hamiltonian_registry().keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Build a terminal cost from a registered name and its parameter record.
pub fn build_cost(name: &str, params: &Value) -> Result<Arc<dyn TerminalCost>> {
    match cost_registry().get(name) {
        Some(builder) => builder(params),
        None => Err(Error::invalid(format!(
            "unknown cost model '{name}' (known: {})",
            cost_registry().keys().cloned().collect::<Vec<_>>().join(", ")
        ))),
    }
}
