//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Symmetric part `(A + A^T)/2`.
pub fn sym_part(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let mut ev: Vec<f64> = DMatrix::symmetric_eigen(sym_part(a))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    DVector::from_vec(ev)
}

/// Smallest eigenvalue of a symmetric matrix together with a unit eigenvector.
pub fn sym_min_eigenpair(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    extremal_eigenpair(a, true)
}

/// Largest eigenvalue of a symmetric matrix together with a unit eigenvector.
pub fn sym_max_eigenpair(a: &DMatrix<f64>) -> (f64, DVector<f64>) {
    extremal_eigenpair(a, false)
}

fn extremal_eigenpair(a: &DMatrix<f64>, take_min: bool) -> (f64, DVector<f64>) {
    let eig = DMatrix::symmetric_eigen(sym_part(a));
    let mut idx = 0usize;
    for i in 1..eig.eigenvalues.len() {
        let better = if take_min {
            eig.eigenvalues[i] < eig.eigenvalues[idx]
        } else {
            eig.eigenvalues[i] > eig.eigenvalues[idx]
        };
        if better {
            idx = i;
        }
    }
    (eig.eigenvalues[idx], eig.eigenvectors.column(idx).into())
}

/// Spectral (2-matrix) norm: the largest singular value.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    sv.iter().cloned().fold(0.0, f64::max)
}

/// Inverse square root of a symmetric positive-definite matrix via
/// eigendecomposition. `floor` is the smallest admissible eigenvalue;
/// anything below it makes the square root undefined for our purposes.
pub fn sym_inv_sqrt(a: &DMatrix<f64>, floor: f64, context: &str) -> Result<DMatrix<f64>> {
    let eig = DMatrix::symmetric_eigen(sym_part(a));
    let n = eig.eigenvalues.len();
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..n {
        let ev = eig.eigenvalues[j];
        if ev < floor {
            return Err(Error::numerical(format!(
                "{context}: matrix not positive definite (eigenvalue {ev:.6e} below floor {floor:.6e})"
            )));
        }
        let s = 1.0 / ev.sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Solve `A x = b` for a square system; errors out on (near-)singular `A`.
pub fn solve_linear(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::numerical("singular linear system".to_string()))
}

/// Max absolute entry of a vector.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Max absolute entry of a matrix.
pub fn mat_inf_norm(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn eigenvalues_of_diag() {
        let a = dmatrix![3.0, 0.0; 0.0, -1.0];
        let ev = sym_eigenvalues(&a);
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn inv_sqrt_roundtrip() {
        let a = dmatrix![4.0, 1.0; 1.0, 3.0];
        let s = sym_inv_sqrt(&a, 1e-12, "test").unwrap();
        let should_be_inv = &s * &s;
        let prod = &should_be_inv * &a;
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(mat_inf_norm(&(prod - id)) < 1e-10);
    }

    #[test]
    fn inv_sqrt_rejects_indefinite() {
        let a = dmatrix![1.0, 0.0; 0.0, -1.0];
        assert!(sym_inv_sqrt(&a, 1e-12, "test").is_err());
    }

    #[test]
    fn spectral_norm_matches_eigen_for_symmetric() {
        let a = dmatrix![2.0, 1.0; 1.0, 2.0];
        assert!((spectral_norm(&a) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn min_eigenpair_witness_reproduces_value() {
        let a = dmatrix![2.0, -1.0; -1.0, 2.0];
        let (lam, v) = sym_min_eigenpair(&a);
        let q = (v.transpose() * &a * &v)[(0, 0)];
        assert!((q - lam).abs() < 1e-12);
    }
}
