//! Empirical probability measures and permutation couplings.
//!
//! An [`EmpiricalMeasure`] is a uniformly weighted cloud of `N` points in
//! `R^d`; it is the computable stand-in for a probability measure with
//! finite second moment. A [`Coupling`] pairs two equal-size measures
//! through a permutation, which is enough to probe transport-plan
//! quantifiers on equal-size particle clouds.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniformly weighted point cloud in `R^d`. Every point carries mass `1/N`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    points: Vec<DVector<f64>>,
    dim: usize,
}

impl EmpiricalMeasure {
    /// Build a measure from a nonempty list of equal-dimension points.
    pub fn new(points: Vec<DVector<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("empirical measure needs at least one point"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("state dimension must be at least 1"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "point {i} has dimension {} but point 0 has dimension {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("point {i} has a non-finite coordinate")));
            }
        }
        Ok(Self { points, dim })
    }

    /// Convenience constructor from raw coordinate rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows.iter().map(|r| DVector::from_vec(r.clone())).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // by construction N >= 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Uniform weight of every support point.
    pub fn weight(&self) -> f64 {
        1.0 / self.points.len() as f64
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &DVector<f64> {
        &self.points[i]
    }

    /// Arithmetic mean of the support points.
    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.dim);
        for p in &self.points {
            m += p;
        }
        m / self.points.len() as f64
    }

    /// Index of `point` in the support under exact coordinate equality.
    /// Kernel evaluations at off-support points are an error, not an
    /// extrapolation; this is the lookup that enforces it.
    pub fn support_index(&self, point: &DVector<f64>) -> Result<usize> {
        self.points
            .iter()
            .position(|p| p == point)
            .ok_or_else(|| Error::invalid("queried point is not a support point of the measure"))
    }

    /// Copy of the measure with support point `j` replaced by `point`.
    pub fn with_point(&self, j: usize, point: DVector<f64>) -> Self {
        let mut points = self.points.clone();
        points[j] = point;
        Self { points, dim: self.dim }
    }
}

/// Permutation coupling between two equal-size empirical measures:
/// left point `i` is matched with right point `perm[i]`, weight `1/N` per pair.
#[derive(Debug, Clone)]
pub struct Coupling {
    left: EmpiricalMeasure,
    right: EmpiricalMeasure,
    perm: Vec<usize>,
}

impl Coupling {
    pub fn new(left: EmpiricalMeasure, right: EmpiricalMeasure, perm: Vec<usize>) -> Result<Self> {
        let n = left.len();
        if right.len() != n {
            return Err(Error::invalid(format!(
                "coupling requires equal sizes, got {n} and {}",
                right.len()
            )));
        }
        if perm.len() != n {
            return Err(Error::invalid(format!(
                "permutation length {} does not match measure size {n}",
                perm.len()
            )));
        }
        let mut seen = vec![false; n];
        for &j in &perm {
            if j >= n || seen[j] {
                return Err(Error::invalid("permutation is not a bijection on 0..N"));
            }
            seen[j] = true;
        }
        Ok(Self { left, right, perm })
    }

    /// Identity coupling of a measure with itself.
    pub fn identity(measure: EmpiricalMeasure) -> Self {
        let perm = (0..measure.len()).collect();
        Self { left: measure.clone(), right: measure, perm }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn left(&self) -> &EmpiricalMeasure {
        &self.left
    }

    pub fn right(&self) -> &EmpiricalMeasure {
        &self.right
    }

    /// Pairs `(x_i, y_{perm(i)})`, each of weight `1/N`.
    pub fn pairs(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> {
        self.left
            .points
            .iter()
            .enumerate()
            .map(move |(i, x)| (x, self.right.point(self.perm[i])))
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> EmpiricalMeasure {
        EmpiricalMeasure::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn singleton_measure() {
        let mu = m(&[&[0.0]]);
        assert_eq!(mu.len(), 1);
        assert_eq!(mu.dim(), 1);
        assert_eq!(mu.weight(), 1.0);
    }

    #[test]
    fn symmetric_pair_has_zero_mean() {
        let mu = m(&[&[-1.0], &[1.0]]);
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.mean()[0], 0.0);
    }

    #[test]
    fn mean_examples() {
        assert_eq!(m(&[&[1.0, 2.0]]).mean().as_slice(), &[1.0, 2.0]);
        assert_eq!(m(&[&[0.0], &[1.0], &[2.0]]).mean()[0], 1.0);
    }

    #[test]
    fn construction_errors() {
        assert!(EmpiricalMeasure::from_rows(&[]).is_err());
        assert!(EmpiricalMeasure::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(EmpiricalMeasure::from_rows(&[vec![f64::NAN]]).is_err());
        assert!(EmpiricalMeasure::from_rows(&[vec![]]).is_err());
    }

    #[test]
    fn coupling_enumerates_pairs() {
        // sigma = (2,3,1) in 1-based notation, i.e. [1, 2, 0] here.
        let mu = m(&[&[0.0], &[1.0], &[2.0]]);
        let nu = m(&[&[10.0], &[11.0], &[12.0]]);
        let c = Coupling::new(mu, nu, vec![1, 2, 0]).unwrap();
        let pairs: Vec<(f64, f64)> = c.pairs().map(|(x, y)| (x[0], y[0])).collect();
        assert_eq!(pairs, vec![(0.0, 11.0), (1.0, 12.0), (2.0, 10.0)]);
    }

    #[test]
    fn coupling_swap_n2() {
        let mu = m(&[&[1.0], &[2.0]]);
        let nu = m(&[&[3.0], &[4.0]]);
        let c = Coupling::new(mu, nu, vec![1, 0]).unwrap();
        let pairs: Vec<(f64, f64)> = c.pairs().map(|(x, y)| (x[0], y[0])).collect();
        assert_eq!(pairs, vec![(1.0, 4.0), (2.0, 3.0)]);
    }

    #[test]
    fn coupling_marginals_recovered() {
        let mu = m(&[&[0.0], &[1.0], &[2.0], &[3.0]]);
        let nu = m(&[&[5.0], &[6.0], &[7.0], &[8.0]]);
        let c = Coupling::new(mu.clone(), nu.clone(), vec![3, 0, 2, 1]).unwrap();
        // Each right point must be used exactly once; pair weights sum to 1.
        let mut used = vec![0usize; 4];
        let mut total = 0.0;
        for (_, y) in c.pairs() {
            used[nu.support_index(y).unwrap()] += 1;
            total += 1.0 / c.len() as f64;
        }
        assert!(used.iter().all(|&u| u == 1));
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn coupling_rejects_bad_perms() {
        let mu = m(&[&[0.0], &[1.0]]);
        let nu = m(&[&[0.0], &[1.0]]);
        assert!(Coupling::new(mu.clone(), nu.clone(), vec![0, 0]).is_err());
        assert!(Coupling::new(mu.clone(), nu.clone(), vec![0, 2]).is_err());
        assert!(Coupling::new(mu.clone(), nu.clone(), vec![0]).is_err());
        let big = m(&[&[0.0], &[1.0], &[2.0]]);
        assert!(Coupling::new(mu, big, vec![0, 1]).is_err());
    }

    #[test]
    fn support_index_rejects_off_support() {
        let mu = m(&[&[0.0], &[1.0]]);
        assert_eq!(mu.support_index(&DVector::from_vec(vec![1.0])).unwrap(), 1);
        assert!(mu.support_index(&DVector::from_vec(vec![0.5])).is_err());
    }
}
