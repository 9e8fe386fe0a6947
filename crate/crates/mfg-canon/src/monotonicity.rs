//! Monotonicity quadratic forms on empirical measures.
//!
//! Each double-integral condition becomes an `(N·d)×(N·d)` symmetric matrix
//! assembled with quadrature weight `1/N` per support point, so the
//! quantifier over test fields is resolved exactly by an eigenvalue
//! computation. Quantifiers over measures, couplings and momentum fields
//! stay sampled: a failing instance is a proof of non-monotonicity (the
//! witness field is attached), a passing sweep is evidence only.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{mat_inf_norm, sym_inv_sqrt, sym_part};
use crate::measures::{Coupling, EmpiricalMeasure};
use crate::models::{Hamiltonian, TerminalCost};
use crate::transform::transform_hamiltonian;

/// Which monotonicity form a report refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FormKind {
    #[serde(rename = "disp-G-2nd")]
    DispCost2nd,
    #[serde(rename = "disp-H-2nd")]
    DispHamiltonian2nd,
    #[serde(rename = "alpha-disp-H")]
    AlphaDispHamiltonian,
    #[serde(rename = "anti-G")]
    AntiCost,
    #[serde(rename = "disp-G-1st")]
    DispCost1st,
    #[serde(rename = "disp-H-1st")]
    DispHamiltonian1st,
}

impl FormKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FormKind::DispCost2nd => "disp-G-2nd",
            FormKind::DispHamiltonian2nd => "disp-H-2nd",
            FormKind::AlphaDispHamiltonian => "alpha-disp-H",
            FormKind::AntiCost => "anti-G",
            FormKind::DispCost1st => "disp-G-1st",
            FormKind::DispHamiltonian1st => "disp-H-1st",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Result of one assembled monotonicity check.
///
/// `extremal_eigenvalue` is the smallest eigenvalue for `>= 0` forms and the
/// largest for `<= 0` forms; `margin` is the signed distance to the
/// threshold (nonnegative means satisfied); the witness is the extremal
/// direction as one row per support point, attached on failure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub kind: FormKind,
    pub extremal_eigenvalue: f64,
    pub margin: f64,
    pub verdict: Verdict,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Anti-monotonicity parameter tuple.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LambdaParams {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl LambdaParams {
    pub fn new(l0: f64, l1: f64, l2: f64, l3: f64) -> Result<Self> {
        let lp = Self { l0, l1, l2, l3 };
        lp.validate()?;
        Ok(lp)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.l0, self.l1, self.l2, self.l3].iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("lambda: all entries must be finite"));
        }
        if self.l2 <= 0.0 {
            return Err(Error::invalid("lambda: lambda2 must be positive"));
        }
        if self.l3 < 0.0 {
            return Err(Error::invalid("lambda: lambda3 must be nonnegative"));
        }
        Ok(())
    }

    /// `lambda0 <= 0` is accepted but flagged in reports.
    pub fn nonstandard_l0(&self) -> bool {
        self.l0 <= 0.0
    }
}

/// Zero momentum field on `n` support points, the default when unspecified.
pub fn zero_field(n: usize, d: usize) -> Vec<DVector<f64>> {
    vec![DVector::zeros(d); n]
}

fn check_field(mu: &EmpiricalMeasure, field: &[DVector<f64>], what: &str) -> Result<()> {
    if field.len() != mu.len() {
        return Err(Error::invalid(format!(
            "{what} has {} entries but the measure has {} support points",
            field.len(),
            mu.len()
        )));
    }
    if field.iter().any(|v| v.len() != mu.dim()) {
        return Err(Error::invalid(format!("{what} has entries of wrong dimension")));
    }
    Ok(())
}

fn add_block(m: &mut DMatrix<f64>, bi: usize, bj: usize, d: usize, block: &DMatrix<f64>, w: f64) {
    for a in 0..d {
        for b in 0..d {
            m[(bi * d + a, bj * d + b)] += w * block[(a, b)];
        }
    }
}

/// Default scale-aware eigenvalue tolerance `1e-9 (1 + |M|_2)`.
fn default_tolerance(two_norm: f64) -> f64 {
    1e-9 * (1.0 + two_norm)
}

enum Sense {
    /// The form must be nonnegative: extremal eigenvalue is the minimum.
    Nonnegative,
    /// The form must be nonpositive: extremal eigenvalue is the maximum.
    Nonpositive,
}

fn report_from_matrix(
    kind: FormKind,
    m: &DMatrix<f64>,
    sense: Sense,
    tol: Option<f64>,
    n: usize,
    d: usize,
) -> MonotonicityReport {
    let eig = DMatrix::symmetric_eigen(m.clone());
    let mut min_idx = 0usize;
    let mut max_idx = 0usize;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[max_idx] {
            max_idx = i;
        }
    }
    let two_norm = eig.eigenvalues[min_idx].abs().max(eig.eigenvalues[max_idx].abs());
    let tolerance = tol.unwrap_or_else(|| default_tolerance(two_norm));
    let (extremal, margin, witness_idx) = match sense {
        Sense::Nonnegative => (eig.eigenvalues[min_idx], eig.eigenvalues[min_idx], min_idx),
        Sense::Nonpositive => (eig.eigenvalues[max_idx], -eig.eigenvalues[max_idx], max_idx),
    };
    let verdict = if margin >= -tolerance { Verdict::Pass } else { Verdict::Fail };
    let witness = if verdict == Verdict::Fail {
        let v = eig.eigenvectors.column(witness_idx);
        Some((0..n).map(|i| (0..d).map(|a| v[i * d + a]).collect()).collect())
    } else {
        None
    };
    MonotonicityReport {
        kind,
        extremal_eigenvalue: extremal,
        margin,
        verdict,
        tolerance,
        witness,
        flags: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// Terminal-cost displacement monotonicity
// ---------------------------------------------------------------------------

/// Assemble the displacement form of a terminal cost on `mu`:
/// `xi' M xi` equals the mixed `hess_xx`/`hess_xmu` double integral with
/// weight `1/N` per point. Monotonicity requires `M >= 0`.
pub fn displacement_form_cost(g: &dyn TerminalCost, mu: &EmpiricalMeasure) -> Result<DMatrix<f64>> {
    let n = mu.len();
    let d = mu.dim();
    if d != g.dim() {
        return Err(Error::invalid("cost model dimension does not match the measure"));
    }
    let w1 = mu.weight();
    let w2 = w1 * w1;
    let mut m = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        let xi = mu.point(i);
        add_block(&mut m, i, i, d, &g.hess_xx(xi, mu), w1);
        for j in 0..n {
            add_block(&mut m, i, j, d, &g.hess_xmu(xi, mu, j), w2);
        }
    }
    Ok(sym_part(&m))
}

/// Verdict on displacement monotonicity of a terminal cost over `mu`.
pub fn check_displacement_cost(
    g: &dyn TerminalCost,
    mu: &EmpiricalMeasure,
    tol: Option<f64>,
) -> Result<MonotonicityReport> {
    let m = displacement_form_cost(g, mu)?;
    Ok(report_from_matrix(FormKind::DispCost2nd, &m, Sense::Nonnegative, tol, mu.len(), mu.dim()))
}

// ---------------------------------------------------------------------------
// Hamiltonian displacement monotonicity
// ---------------------------------------------------------------------------

fn quarter_term(
    h: &dyn Hamiltonian,
    mu: &EmpiricalMeasure,
    p_field: &[DVector<f64>],
    q: &mut DMatrix<f64>,
) -> Result<()> {
    let n = mu.len();
    let d = mu.dim();
    let w1 = mu.weight();
    let floor = match h.convexity_c0() {
        Some(c0) => 1.0 / c0 - 1e-10,
        None => 1e-12,
    };
    for i in 0..n {
        let xi = mu.point(i);
        let pi = &p_field[i];
        let root = sym_inv_sqrt(
            &h.hess_pp(xi, mu, pi),
            floor,
            &format!("hess_pp at support point {i}"),
        )?;
        // C_i = hess_pp^{-1/2} * (1/N) [K_{i,0} | ... | K_{i,N-1}], d x (N d)
        let mut c = DMatrix::zeros(d, n * d);
        for j in 0..n {
            let k = &root * h.hess_pmu(xi, mu, j, pi);
            for a in 0..d {
                for b in 0..d {
                    c[(a, j * d + b)] = w1 * k[(a, b)];
                }
            }
        }
        *q += c.transpose() * &c * (0.25 * w1);
    }
    Ok(())
}

/// Assemble the second-order displacement form of a Hamiltonian along the
/// momentum field `p_field`. Monotonicity requires `v' Q v <= 0`.
pub fn displacement_form_hamiltonian(
    h: &dyn Hamiltonian,
    mu: &EmpiricalMeasure,
    p_field: &[DVector<f64>],
) -> Result<DMatrix<f64>> {
    let n = mu.len();
    let d = mu.dim();
    if d != h.dim() {
        return Err(Error::invalid("Hamiltonian dimension does not match the measure"));
    }
    check_field(mu, p_field, "momentum field")?;
    let w1 = mu.weight();
    let w2 = w1 * w1;
    let mut q = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        let xi = mu.point(i);
        let pi = &p_field[i];
        add_block(&mut q, i, i, d, &h.hess_xx(xi, mu, pi), w1);
        for j in 0..n {
            add_block(&mut q, i, j, d, &h.hess_xmu(xi, mu, j, pi), w2);
        }
    }
    quarter_term(h, mu, p_field, &mut q)?;
    Ok(sym_part(&q))
}

/// Verdict on second-order displacement monotonicity of a Hamiltonian.
pub fn check_displacement_hamiltonian(
    h: &dyn Hamiltonian,
    mu: &EmpiricalMeasure,
    p_field: &[DVector<f64>],
    tol: Option<f64>,
) -> Result<MonotonicityReport> {
    let q = displacement_form_hamiltonian(h, mu, p_field)?;
    Ok(report_from_matrix(
        FormKind::DispHamiltonian2nd,
        &q,
        Sense::Nonpositive,
        tol,
        mu.len(),
        mu.dim(),
    ))
}

/// Direct assembly of the shifted displacement form: the `alpha`-quadratic
/// `hess_xx - 2a hess_xp + a^2 hess_pp` on the diagonal, the kernel blocks
/// `hess_xmu - a hess_pmu`, and the unchanged quarter term.
pub fn alpha_displacement_form(
    h: &dyn Hamiltonian,
    mu: &EmpiricalMeasure,
    p_field: &[DVector<f64>],
    alpha: f64,
) -> Result<DMatrix<f64>> {
    let n = mu.len();
    let d = mu.dim();
    if d != h.dim() {
        return Err(Error::invalid("Hamiltonian dimension does not match the measure"));
    }
    check_field(mu, p_field, "momentum field")?;
    let w1 = mu.weight();
    let w2 = w1 * w1;
    let mut q = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        let xi = mu.point(i);
        let pi = &p_field[i];
        let diag = h.hess_xx(xi, mu, pi) - h.hess_xp(xi, mu, pi) * (2.0 * alpha)
            + h.hess_pp(xi, mu, pi) * (alpha * alpha);
        add_block(&mut q, i, i, d, &diag, w1);
        for j in 0..n {
            let kernel = h.hess_xmu(xi, mu, j, pi) - h.hess_pmu(xi, mu, j, pi) * alpha;
            add_block(&mut q, i, j, d, &kernel, w2);
        }
    }
    quarter_term(h, mu, p_field, &mut q)?;
    Ok(sym_part(&q))
}

/// Max entrywise disagreement tolerated between the two assembly routes.
pub const ROUTE_AGREEMENT_TOL: f64 = 1e-10;

/// Verdict on displacement monotonicity of the momentum-shifted Hamiltonian.
///
/// The form is assembled twice: directly, and through the transformed model
/// evaluated along the shifted field `p + alpha x` (so the underlying model
/// sees the original momenta). Any entrywise disagreement beyond
/// [`ROUTE_AGREEMENT_TOL`] is an internal-consistency error.
pub fn check_alpha_displacement(
    h: &Arc<dyn Hamiltonian>,
    mu: &EmpiricalMeasure,
    p_field: &[DVector<f64>],
    alpha: f64,
    tol: Option<f64>,
) -> Result<MonotonicityReport> {
    let direct = alpha_displacement_form(h.as_ref(), mu, p_field, alpha)?;

    let transformed = transform_hamiltonian(h.clone(), alpha);
    let shifted_field: Vec<DVector<f64>> = p_field
        .iter()
        .zip(mu.points())
        .map(|(p, x)| p + x * alpha)
        .collect();
    let via_transform = displacement_form_hamiltonian(transformed.as_ref(), mu, &shifted_field)?;

    let dev = mat_inf_norm(&(&direct - &via_transform));
    if dev > ROUTE_AGREEMENT_TOL {
        return Err(Error::internal(format!(
            "alpha-displacement assembly routes disagree by {dev:.3e} (tolerance {ROUTE_AGREEMENT_TOL:.1e}) at alpha = {alpha}"
        )));
    }

    Ok(report_from_matrix(
        FormKind::AlphaDispHamiltonian,
        &direct,
        Sense::Nonpositive,
        tol,
        mu.len(),
        mu.dim(),
    ))
}

// ---------------------------------------------------------------------------
// Anti-monotonicity
// ---------------------------------------------------------------------------

/// Assemble the anti-monotonicity form both directly and through its
/// completed-square reformulation. Anti-monotonicity requires the (shared)
/// form to be `<= 0`.
pub fn anti_monotone_forms(
    g: &dyn TerminalCost,
    mu: &EmpiricalMeasure,
    lambda: &LambdaParams,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    lambda.validate()?;
    let n = mu.len();
    let d = mu.dim();
    if d != g.dim() {
        return Err(Error::invalid("cost model dimension does not match the measure"));
    }
    let w1 = mu.weight();
    let w2 = w1 * w1;
    let id = DMatrix::<f64>::identity(d, d);

    // Row matrices C_i = (1/N) [K(x_i, 0) | ... | K(x_i, N-1)].
    let mut rows: Vec<DMatrix<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let xi = mu.point(i);
        let mut c = DMatrix::zeros(d, n * d);
        for j in 0..n {
            let k = g.hess_xmu(xi, mu, j);
            for a in 0..d {
                for b in 0..d {
                    c[(a, j * d + b)] = w1 * k[(a, b)];
                }
            }
        }
        rows.push(c);
    }

    let mut direct = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        let xi = mu.point(i);
        let hxx = g.hess_xx(xi, mu);
        let diag = &hxx * lambda.l0 + hxx.transpose() * &hxx - &id * lambda.l3;
        add_block(&mut direct, i, i, d, &diag, w1);
        for j in 0..n {
            add_block(&mut direct, i, j, d, &g.hess_xmu(xi, mu, j), lambda.l1 * w2);
        }
        direct += rows[i].transpose() * &rows[i] * (lambda.l2 * w1);
    }
    let direct = sym_part(&direct);

    // Completed square: |hess_xx xi + (l0/2) xi|^2 and
    // l2 |C_i xi + (l1/(2 l2)) xi_i|^2 minus the constant multiple of |xi|^2.
    let ratio = lambda.l1 / (2.0 * lambda.l2);
    let slack = lambda.l3 + (lambda.l0 / 2.0).powi(2) + lambda.l2 * ratio * ratio;
    let mut squared = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        let xi = mu.point(i);
        let shifted = g.hess_xx(xi, mu) + &id * (lambda.l0 / 2.0);
        let diag = shifted.transpose() * &shifted - &id * slack;
        add_block(&mut squared, i, i, d, &diag, w1);
        let mut c = rows[i].clone();
        for a in 0..d {
            c[(a, i * d + a)] += ratio;
        }
        squared += c.transpose() * &c * (lambda.l2 * w1);
    }
    let squared = sym_part(&squared);

    Ok((direct, squared))
}

/// Verdict on anti-monotonicity, with the completed-square reformulation
/// cross-checked entrywise to [`ROUTE_AGREEMENT_TOL`].
pub fn check_anti_monotone(
    g: &dyn TerminalCost,
    mu: &EmpiricalMeasure,
    lambda: &LambdaParams,
    tol: Option<f64>,
) -> Result<MonotonicityReport> {
    let (direct, squared) = anti_monotone_forms(g, mu, lambda)?;
    let dev = mat_inf_norm(&(&direct - &squared));
    if dev > ROUTE_AGREEMENT_TOL {
        return Err(Error::internal(format!(
            "anti-monotonicity form and its completed-square reformulation disagree by {dev:.3e}"
        )));
    }
    let mut report =
        report_from_matrix(FormKind::AntiCost, &direct, Sense::Nonpositive, tol, mu.len(), mu.dim());
    if lambda.nonstandard_l0() {
        report.flags.push("lambda0 <= 0 accepted (nonstandard)".to_string());
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// First-order (coupling) checks
// ---------------------------------------------------------------------------

/// First-order displacement gap of a terminal cost along a coupling:
/// `(1/N) sum_i [grad_x G(x_i, mu) - grad_x G(y_{s(i)}, nu)] . (x_i - y_{s(i)})`.
/// Monotonicity asks for a nonnegative value.
pub fn first_order_gap_cost(g: &dyn TerminalCost, coupling: &Coupling) -> Result<f64> {
    let mu = coupling.left();
    let nu = coupling.right();
    if g.dim() != mu.dim() {
        return Err(Error::invalid("cost model dimension does not match the coupling"));
    }
    let w = mu.weight();
    let mut total = 0.0;
    for (x, y) in coupling.pairs() {
        let gap = g.grad_x(x, mu) - g.grad_x(y, nu);
        total += w * gap.dot(&(x - y));
        if !total.is_finite() {
            return Err(Error::numerical("non-finite first-order cost gap"));
        }
    }
    Ok(total)
}

/// First-order displacement gap of a Hamiltonian along a coupling and a
/// pair of momentum fields.
///
/// The displayed condition reads the second field at the coupled point, so
/// the `y`-side momentum is `p2[s(i)]` throughout; a nonnegative value is
/// the monotonicity requirement.
pub fn first_order_gap_hamiltonian(
    h: &dyn Hamiltonian,
    coupling: &Coupling,
    p1_field: &[DVector<f64>],
    p2_field: &[DVector<f64>],
) -> Result<f64> {
    let mu = coupling.left();
    let nu = coupling.right();
    if h.dim() != mu.dim() {
        return Err(Error::invalid("Hamiltonian dimension does not match the coupling"));
    }
    check_field(mu, p1_field, "first momentum field")?;
    check_field(nu, p2_field, "second momentum field")?;
    let w = mu.weight();
    let mut total = 0.0;
    for (i, (x, y)) in coupling.pairs().enumerate() {
        let p1 = &p1_field[i];
        let p2 = &p2_field[coupling.permutation()[i]];
        let gx = h.grad_x(x, mu, p1) - h.grad_x(y, nu, p2);
        let gp = h.grad_p(x, mu, p1) - h.grad_p(y, nu, p2);
        total += w * (-gx.dot(&(x - y)) + gp.dot(&(p1 - p2)));
        if !total.is_finite() {
            return Err(Error::numerical("non-finite first-order Hamiltonian gap"));
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::builtins::{
        ConcaveQuadraticCost, LqHamiltonian, MeanFieldLqHamiltonian, QuadraticCost,
    };
    use crate::sampling::{rng_from_seed, sample_p_field, sample_vector, Distribution, MeasureSampler};
    use crate::transform::transform_cost;
    use nalgebra::DMatrix;

    /// Cost with an asymmetric constant measure kernel:
    /// G(x, mu) = x . (B mean(mu)).
    struct BilinearMeanCost {
        b: DMatrix<f64>,
    }

    impl TerminalCost for BilinearMeanCost {
        fn dim(&self) -> usize {
            self.b.nrows()
        }
        fn value(&self, x: &DVector<f64>, mu: &EmpiricalMeasure) -> f64 {
            x.dot(&(&self.b * mu.mean()))
        }
        fn grad_x(&self, _x: &DVector<f64>, mu: &EmpiricalMeasure) -> DVector<f64> {
            &self.b * mu.mean()
        }
        fn grad_mu(&self, x: &DVector<f64>, _mu: &EmpiricalMeasure, _j: usize) -> DVector<f64> {
            self.b.transpose() * x
        }
        fn hess_xx(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure) -> DMatrix<f64> {
            DMatrix::zeros(self.dim(), self.dim())
        }
        fn hess_xmu(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, _j: usize) -> DMatrix<f64> {
            self.b.clone()
        }
    }

    fn m(rows: &[&[f64]]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn quad(m: &DMatrix<f64>, field: &[DVector<f64>]) -> f64 {
        let d = field[0].len();
        let v = DVector::from_fn(field.len() * d, |k, _| field[k / d][k % d]);
        (v.transpose() * m * v)[(0, 0)]
    }

    // Literal double-integral sums, the independent oracle for the
    // assembled matrices.

    fn direct_disp_cost(g: &dyn TerminalCost, mu: &EmpiricalMeasure, xi: &[DVector<f64>]) -> f64 {
        let w = mu.weight();
        let n = mu.len();
        let mut total = 0.0;
        for i in 0..n {
            total += w * (g.hess_xx(mu.point(i), mu) * &xi[i]).dot(&xi[i]);
            for j in 0..n {
                total += w * w * (g.hess_xmu(mu.point(i), mu, j) * &xi[i]).dot(&xi[j]);
            }
        }
        total
    }

    fn quarter_direct(
        h: &dyn Hamiltonian,
        mu: &EmpiricalMeasure,
        p: &[DVector<f64>],
        v: &[DVector<f64>],
    ) -> f64 {
        let w = mu.weight();
        let n = mu.len();
        let mut total = 0.0;
        for i in 0..n {
            let root = sym_inv_sqrt(&h.hess_pp(mu.point(i), mu, &p[i]), 1e-12, "test").unwrap();
            let mut acc = DVector::zeros(mu.dim());
            for j in 0..n {
                acc += h.hess_pmu(mu.point(i), mu, j, &p[i]) * &v[j] * w;
            }
            let s = &root * acc;
            total += 0.25 * w * s.dot(&s);
        }
        total
    }

    fn direct_disp_hamiltonian(
        h: &dyn Hamiltonian,
        mu: &EmpiricalMeasure,
        p: &[DVector<f64>],
        v: &[DVector<f64>],
    ) -> f64 {
        let w = mu.weight();
        let n = mu.len();
        let mut total = 0.0;
        for i in 0..n {
            let xi = mu.point(i);
            total += w * (h.hess_xx(xi, mu, &p[i]) * &v[i]).dot(&v[i]);
            for j in 0..n {
                total += w * w * (h.hess_xmu(xi, mu, j, &p[i]) * &v[j]).dot(&v[i]);
            }
        }
        total + quarter_direct(h, mu, p, v)
    }

    fn direct_alpha_form(
        h: &dyn Hamiltonian,
        mu: &EmpiricalMeasure,
        p: &[DVector<f64>],
        v: &[DVector<f64>],
        alpha: f64,
    ) -> f64 {
        let w = mu.weight();
        let n = mu.len();
        let mut total = 0.0;
        for i in 0..n {
            let xi = mu.point(i);
            let diag = h.hess_xx(xi, mu, &p[i]) - h.hess_xp(xi, mu, &p[i]) * (2.0 * alpha)
                + h.hess_pp(xi, mu, &p[i]) * (alpha * alpha);
            total += w * (diag * &v[i]).dot(&v[i]);
            for j in 0..n {
                let k = h.hess_xmu(xi, mu, j, &p[i]) - h.hess_pmu(xi, mu, j, &p[i]) * alpha;
                total += w * w * (k * &v[j]).dot(&v[i]);
            }
        }
        total + quarter_direct(h, mu, p, v)
    }

    fn direct_anti(
        g: &dyn TerminalCost,
        mu: &EmpiricalMeasure,
        l: &LambdaParams,
        xi: &[DVector<f64>],
    ) -> f64 {
        let w = mu.weight();
        let n = mu.len();
        let mut total = 0.0;
        for i in 0..n {
            let x = mu.point(i);
            let hxx = g.hess_xx(x, mu);
            total += l.l0 * w * (&hxx * &xi[i]).dot(&xi[i]);
            let sq = &hxx * &xi[i];
            total += w * sq.dot(&sq);
            for j in 0..n {
                total += l.l1 * w * w * (g.hess_xmu(x, mu, j) * &xi[i]).dot(&xi[j]);
            }
            let mut avg = DVector::zeros(mu.dim());
            for j in 0..n {
                avg += g.hess_xmu(x, mu, j) * &xi[j] * w;
            }
            total += l.l2 * w * avg.dot(&avg);
            total -= l.l3 * w * xi[i].dot(&xi[i]);
        }
        total
    }

    #[test]
    fn cost_form_identity_hessian() {
        let g = QuadraticCost::isotropic(2, 1.0);
        let mu = m(&[&[0.1, 0.2], &[-0.4, 0.5], &[0.9, -0.3]]);
        let mat = displacement_form_cost(&g, &mu).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 / 3.0 } else { 0.0 };
                assert!((mat[(i, j)] - expect).abs() < 1e-15);
            }
        }
        let report = check_displacement_cost(&g, &mu, None).unwrap();
        assert!(report.passed());
        assert!((report.margin - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn cost_form_mean_coupled_hand_assembly() {
        let g = QuadraticCost::new(1, 0.0, 0.0, 1.0).unwrap();
        let mu = m(&[&[-1.0], &[1.0]]);
        let mat = displacement_form_cost(&g, &mu).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
        assert!((mat.clone() - expect).iter().all(|v| v.abs() < 1e-15));
        let ev = crate::linalg::sym_eigenvalues(&mat);
        assert!(ev[0].abs() < 1e-15);
        assert!((ev[1] - 0.5).abs() < 1e-15);
        // Boundary case passes with zero margin.
        let report = check_displacement_cost(&g, &mu, None).unwrap();
        assert!(report.passed());
        assert!(report.margin.abs() < 1e-12);
    }

    #[test]
    fn cost_form_concave_fails_with_witness() {
        let g = ConcaveQuadraticCost::new(1, 2.0).unwrap();
        let mu = m(&[&[0.3]]);
        let report = check_displacement_cost(&g, &mu, None).unwrap();
        assert!(!report.passed());
        assert!((report.extremal_eigenvalue + 2.0).abs() < 1e-14);
        let witness = report.witness.as_ref().unwrap();
        assert_eq!(witness.len(), 1);
        // The witness reproduces the extremal eigenvalue through the form.
        let mat = displacement_form_cost(&g, &mu).unwrap();
        let field: Vec<DVector<f64>> =
            witness.iter().map(|r| DVector::from_vec(r.clone())).collect();
        let q = quad(&mat, &field);
        assert!((q - report.extremal_eigenvalue).abs() < 1e-9 * report.extremal_eigenvalue.abs());
    }

    #[test]
    fn hamiltonian_form_kinetic_is_zero() {
        let h = LqHamiltonian::isotropic(2, 0.0, 0.0);
        let mu = m(&[&[0.1, -0.2], &[0.7, 0.4]]);
        let field = zero_field(2, 2);
        let q = displacement_form_hamiltonian(&h, &mu, &field).unwrap();
        assert!(q.iter().all(|v| v.abs() < 1e-15));
        assert!(check_displacement_hamiltonian(&h, &mu, &field, None).unwrap().passed());
    }

    #[test]
    fn hamiltonian_form_state_cost_fails() {
        let h = LqHamiltonian::isotropic(1, 1.0, 0.0);
        let mu = m(&[&[0.5]]);
        let q = displacement_form_hamiltonian(&h, &mu, &zero_field(1, 1)).unwrap();
        assert!((q[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(!check_displacement_hamiltonian(&h, &mu, &zero_field(1, 1), None).unwrap().passed());
    }

    #[test]
    fn hamiltonian_form_quarter_term_hand_value() {
        let h = MeanFieldLqHamiltonian::new(1, 1.0, 0.0).unwrap();
        let mu = m(&[&[0.2]]);
        let q = displacement_form_hamiltonian(&h, &mu, &zero_field(1, 1)).unwrap();
        assert!((q[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn alpha_form_hand_values_and_verdicts() {
        let h: Arc<dyn Hamiltonian> = Arc::new(LqHamiltonian::isotropic(1, 0.0, 2.0));
        let mu = m(&[&[0.4]]);
        let field = zero_field(1, 1);
        let q2 = alpha_displacement_form(h.as_ref(), &mu, &field, 2.0).unwrap();
        assert!((q2[(0, 0)] + 4.0).abs() < 1e-14);
        assert!(check_alpha_displacement(&h, &mu, &field, 2.0, None).unwrap().passed());
        let q5 = alpha_displacement_form(h.as_ref(), &mu, &field, 5.0).unwrap();
        assert!((q5[(0, 0)] - 5.0).abs() < 1e-14);
        assert!(!check_alpha_displacement(&h, &mu, &field, 5.0, None).unwrap().passed());
    }

    #[test]
    fn alpha_zero_reduces_to_plain_form() {
        let h: Arc<dyn Hamiltonian> = Arc::new(MeanFieldLqHamiltonian::new(2, 0.7, 0.3).unwrap());
        let mut rng = rng_from_seed(5);
        let mu = MeasureSampler::new(3, 2, Distribution::Normal, 1.0).sample(&mut rng).unwrap();
        let field = sample_p_field(&mut rng, 3, 2, 1.0);
        let a = alpha_displacement_form(h.as_ref(), &mu, &field, 0.0).unwrap();
        let b = displacement_form_hamiltonian(h.as_ref(), &mu, &field).unwrap();
        assert!((a - b).iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn brute_force_equivalence_on_random_directions() {
        let mut rng = rng_from_seed(17);
        let mu = MeasureSampler::new(4, 2, Distribution::Normal, 1.2).sample(&mut rng).unwrap();
        let p = sample_p_field(&mut rng, 4, 2, 0.8);
        let g_asym = BilinearMeanCost {
            b: DMatrix::from_row_slice(2, 2, &[0.3, 1.1, -0.7, 0.2]),
        };
        let g_quad = QuadraticCost::new(2, 0.6, -0.4, 0.9).unwrap();
        let h = MeanFieldLqHamiltonian::new(2, 0.9, -0.5).unwrap();
        let lambda = LambdaParams::new(1.3, -0.8, 0.6, 0.4).unwrap();

        let m_asym = displacement_form_cost(&g_asym, &mu).unwrap();
        let m_quad = displacement_form_cost(&g_quad, &mu).unwrap();
        let m_h = displacement_form_hamiltonian(&h, &mu, &p).unwrap();
        let m_alpha = alpha_displacement_form(&h, &mu, &p, -1.7).unwrap();
        let (m_anti, _) = anti_monotone_forms(&g_asym, &mu, &lambda).unwrap();

        for _ in 0..100 {
            let xi: Vec<DVector<f64>> =
                (0..4).map(|_| sample_vector(&mut rng, 2, Distribution::Normal, 1.0)).collect();
            let checks = [
                (quad(&m_asym, &xi), direct_disp_cost(&g_asym, &mu, &xi)),
                (quad(&m_quad, &xi), direct_disp_cost(&g_quad, &mu, &xi)),
                (quad(&m_h, &xi), direct_disp_hamiltonian(&h, &mu, &p, &xi)),
                (quad(&m_alpha, &xi), direct_alpha_form(&h, &mu, &p, &xi, -1.7)),
                (quad(&m_anti, &xi), direct_anti(&g_asym, &mu, &lambda, &xi)),
            ];
            for (assembled, direct) in checks {
                assert!(
                    (assembled - direct).abs() <= 1e-10 * (1.0 + direct.abs()),
                    "assembled {assembled} vs direct {direct}"
                );
            }
        }
    }

    #[test]
    fn anti_monotone_hand_examples() {
        let mu = m(&[&[0.6]]);
        let lambda = LambdaParams::new(2.0, 0.0, 1.0, 0.0).unwrap();
        let g_anti = ConcaveQuadraticCost::new(1, 2.0).unwrap();
        let report = check_anti_monotone(&g_anti, &mu, &lambda, None).unwrap();
        assert!(report.passed());
        assert!(report.extremal_eigenvalue.abs() < 1e-12);

        let g_convex = QuadraticCost::isotropic(1, 1.0);
        let report = check_anti_monotone(&g_convex, &mu, &lambda, None).unwrap();
        assert!(!report.passed());
        assert!((report.extremal_eigenvalue - 3.0).abs() < 1e-12);

        // A huge slack term dominates everything.
        let generous = LambdaParams::new(2.0, 0.0, 1.0, 1e6).unwrap();
        assert!(check_anti_monotone(&g_convex, &mu, &generous, None).unwrap().passed());
    }

    #[test]
    fn anti_monotone_flags_nonstandard_lambda0() {
        let mu = m(&[&[0.0]]);
        let g = ConcaveQuadraticCost::new(1, 1.0).unwrap();
        let lambda = LambdaParams::new(-0.5, 0.0, 1.0, 5.0).unwrap();
        let report = check_anti_monotone(&g, &mu, &lambda, None).unwrap();
        assert!(!report.flags.is_empty());
        assert!(LambdaParams::new(1.0, 0.0, -1.0, 0.0).is_err());
        assert!(LambdaParams::new(1.0, 0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn completed_square_matches_on_asymmetric_kernel() {
        let mut rng = rng_from_seed(23);
        for _ in 0..20 {
            let mu = MeasureSampler::new(3, 2, Distribution::Normal, 1.0).sample(&mut rng).unwrap();
            let b = DMatrix::from_fn(2, 2, |_, _| sample_vector(&mut rng, 1, Distribution::Normal, 1.0)[0]);
            let g = BilinearMeanCost { b };
            let lambda = LambdaParams::new(
                sample_vector(&mut rng, 1, Distribution::Normal, 1.0)[0],
                sample_vector(&mut rng, 1, Distribution::Normal, 1.0)[0],
                0.1 + sample_vector(&mut rng, 1, Distribution::Uniform, 1.0)[0].abs(),
                sample_vector(&mut rng, 1, Distribution::Uniform, 1.0)[0].abs(),
            )
            .unwrap();
            let (direct, squared) = anti_monotone_forms(&g, &mu, &lambda).unwrap();
            assert!(mat_inf_norm(&(direct - squared)) <= 1e-10);
        }
    }

    #[test]
    fn skew_mixed_hessian_does_not_affect_forms() {
        // R skew-symmetric: hess_xp is skew, and no assembled form may see it.
        let r = DMatrix::from_row_slice(2, 2, &[0.0, 1.3, -1.3, 0.0]);
        let h_skew: Arc<dyn Hamiltonian> = Arc::new(
            LqHamiltonian::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), r).unwrap(),
        );
        let h_zero: Arc<dyn Hamiltonian> = Arc::new(LqHamiltonian::isotropic(2, 0.0, 0.0));
        let mut rng = rng_from_seed(31);
        let mu = MeasureSampler::new(3, 2, Distribution::Normal, 1.0).sample(&mut rng).unwrap();
        let field = sample_p_field(&mut rng, 3, 2, 1.0);
        for alpha in [0.0, 0.8, -2.5] {
            let a = alpha_displacement_form(h_skew.as_ref(), &mu, &field, alpha).unwrap();
            let b = alpha_displacement_form(h_zero.as_ref(), &mu, &field, alpha).unwrap();
            assert!(mat_inf_norm(&(a - b)) < 1e-12);
        }
    }

    #[test]
    fn transform_reduction_verdict_equality() {
        // The alpha check on H must agree with the plain check on the
        // transformed model along the shifted field.
        let h: Arc<dyn Hamiltonian> = Arc::new(MeanFieldLqHamiltonian::new(1, 0.4, 0.2).unwrap());
        let mut rng = rng_from_seed(37);
        let mu = MeasureSampler::new(4, 1, Distribution::Normal, 1.0).sample(&mut rng).unwrap();
        let field = sample_p_field(&mut rng, 4, 1, 1.0);
        for alpha in [-1.0, 0.3, 2.0] {
            let direct = check_alpha_displacement(&h, &mu, &field, alpha, None).unwrap();
            let ha = transform_hamiltonian(h.clone(), alpha);
            let shifted: Vec<DVector<f64>> =
                field.iter().zip(mu.points()).map(|(p, x)| p + x * alpha).collect();
            let reduced =
                check_displacement_hamiltonian(ha.as_ref(), &mu, &shifted, None).unwrap();
            assert_eq!(direct.passed(), reduced.passed());
            assert!((direct.extremal_eigenvalue - reduced.extremal_eigenvalue).abs() < 1e-10);
        }
    }

    #[test]
    fn anti_quadratic_transform_closure() {
        // Adding a|x|^2/2 exactly cancels the concave Hessian.
        let mut rng = rng_from_seed(41);
        for a in [0.5, 2.0, 7.0] {
            let g: Arc<dyn TerminalCost> = Arc::new(ConcaveQuadraticCost::new(2, a).unwrap());
            let ga = transform_cost(g, a);
            for _ in 0..5 {
                let mu =
                    MeasureSampler::new(3, 2, Distribution::Normal, 1.5).sample(&mut rng).unwrap();
                let report = check_displacement_cost(ga.as_ref(), &mu, None).unwrap();
                assert!(report.passed());
                assert!(report.margin >= -1e-12);
            }
        }
    }

    #[test]
    fn first_order_cost_examples() {
        let g = QuadraticCost::isotropic(1, 1.0);
        let mu = m(&[&[0.0]]);
        let nu = m(&[&[1.0]]);
        let id = Coupling::identity(mu.clone());
        assert_eq!(first_order_gap_cost(&g, &id).unwrap(), 0.0);
        let c = Coupling::new(mu.clone(), nu.clone(), vec![0]).unwrap();
        assert_eq!(first_order_gap_cost(&g, &c).unwrap(), 1.0);
        let g_anti = ConcaveQuadraticCost::new(1, 2.0).unwrap();
        let c = Coupling::new(mu, nu, vec![0]).unwrap();
        assert_eq!(first_order_gap_cost(&g_anti, &c).unwrap(), -2.0);
    }

    #[test]
    fn first_order_hamiltonian_examples() {
        let h = LqHamiltonian::isotropic(1, 0.0, 0.0);
        let mu = m(&[&[0.0]]);
        let id = Coupling::identity(mu.clone());
        let zero = zero_field(1, 1);
        assert_eq!(first_order_gap_hamiltonian(&h, &id, &zero, &zero).unwrap(), 0.0);
        let one = vec![DVector::from_vec(vec![1.0])];
        assert_eq!(first_order_gap_hamiltonian(&h, &id, &zero, &one).unwrap(), 1.0);

        // State-coupled part violates monotonicity across displaced clouds.
        let h_q = LqHamiltonian::isotropic(1, 1.0, 0.0);
        let nu = m(&[&[1.0]]);
        let c = Coupling::new(mu, nu, vec![0]).unwrap();
        assert_eq!(first_order_gap_hamiltonian(&h_q, &c, &zero, &zero).unwrap(), -1.0);
    }

    #[test]
    fn second_order_margin_implies_local_first_order() {
        let g = QuadraticCost::new(1, 1.0, 0.2, 0.5).unwrap();
        let mut rng = rng_from_seed(43);
        let mu = MeasureSampler::new(4, 1, Distribution::Normal, 1.0).sample(&mut rng).unwrap();
        let report = check_displacement_cost(&g, &mu, None).unwrap();
        assert!(report.passed() && report.margin > 0.0);
        for _ in 0..20 {
            let nu_points: Vec<DVector<f64>> = mu
                .points()
                .iter()
                .map(|p| p + sample_vector(&mut rng, 1, Distribution::Normal, 0.05))
                .collect();
            let nu = EmpiricalMeasure::new(nu_points).unwrap();
            let perm = crate::sampling::sample_permutation(&mut rng, 4);
            let c = Coupling::new(mu.clone(), nu, perm).unwrap();
            assert!(first_order_gap_cost(&g, &c).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn indefinite_momentum_hessian_names_support_point() {
        // P is not positive definite once q drives it negative along x;
        // easiest: a Hamiltonian whose hess_pp has a negative eigenvalue.
        struct BadPp;
        impl Hamiltonian for BadPp {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, _x: &DVector<f64>, _mu: &EmpiricalMeasure, p: &DVector<f64>) -> f64 {
                -0.5 * p.dot(p)
            }
            fn grad_x(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _p: &DVector<f64>) -> DVector<f64> {
                DVector::zeros(1)
            }
            fn grad_p(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, p: &DVector<f64>) -> DVector<f64> {
                -p.clone()
            }
            fn grad_mu(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _j: usize, _p: &DVector<f64>) -> DVector<f64> {
                DVector::zeros(1)
            }
            fn hess_xx(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::zeros(1, 1)
            }
            fn hess_xp(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::zeros(1, 1)
            }
            fn hess_pp(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _p: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::from_element(1, 1, -1.0)
            }
            fn hess_xmu(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _j: usize, _p: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::zeros(1, 1)
            }
            fn hess_pmu(&self, _x: &DVector<f64>, _m: &EmpiricalMeasure, _j: usize, _p: &DVector<f64>) -> DMatrix<f64> {
                DMatrix::zeros(1, 1)
            }
        }
        let mu = m(&[&[0.0], &[1.0]]);
        let err = displacement_form_hamiltonian(&BadPp, &mu, &zero_field(2, 1)).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("support point"), "unexpected message: {msg}");
    }
}
