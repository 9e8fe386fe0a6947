//! Seeded instance generators. All randomness in the crate flows through a
//! single `ChaCha8` stream created from one explicit seed, so identical
//! inputs reproduce identical results bitwise.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::measures::EmpiricalMeasure;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Normal,
    Uniform,
}

fn draw(rng: &mut ChaCha8Rng, distribution: Distribution, scale: f64) -> f64 {
    match distribution {
        Distribution::Normal => {
            let z: f64 = rng.sample(StandardNormal);
            scale * z
        }
        Distribution::Uniform => rng.gen_range(-scale..=scale),
    }
}

pub fn sample_vector(
    rng: &mut ChaCha8Rng,
    d: usize,
    distribution: Distribution,
    scale: f64,
) -> DVector<f64> {
    DVector::from_fn(d, |_, _| draw(rng, distribution, scale))
}

/// Sampler specification for empirical measures.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeasureSampler {
    pub n: usize,
    pub d: usize,
    #[serde(default)]
    pub distribution: Distribution,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl MeasureSampler {
    pub fn new(n: usize, d: usize, distribution: Distribution, scale: f64) -> Self {
        Self { n, d, distribution, scale }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<EmpiricalMeasure> {
        let points = (0..self.n)
            .map(|_| sample_vector(rng, self.d, self.distribution, self.scale))
            .collect();
        EmpiricalMeasure::new(points)
    }
}

/// Momentum field with one normal draw per support point.
pub fn sample_p_field(rng: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<DVector<f64>> {
    (0..n).map(|_| sample_vector(rng, d, Distribution::Normal, scale)).collect()
}

/// Random permutation of `0..n` by Fisher-Yates.
pub fn sample_permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Evaluation-point stream for the sampled bounds estimator: `(x, mu, p)`
/// triples with `n_support` support points each.
pub fn sample_bounds_instances(
    rng: &mut ChaCha8Rng,
    d: usize,
    n_support: usize,
    n_samples: usize,
    scale: f64,
) -> Result<Vec<(DVector<f64>, EmpiricalMeasure, DVector<f64>)>> {
    let sampler = MeasureSampler::new(n_support, d, Distribution::Normal, scale);
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x = sample_vector(rng, d, Distribution::Normal, scale);
        let mu = sampler.sample(rng)?;
        let p = sample_vector(rng, d, Distribution::Normal, scale);
        out.push((x, mu, p));
    }
    Ok(out)
}
