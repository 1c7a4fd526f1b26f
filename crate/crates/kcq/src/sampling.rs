//! Generalized quasi-Monte Carlo sampling: scrambled Halton point sets,
//! inverse-CDF transforms, Voronoi-probe quadrature weights, and weighted
//! quadrature with compensated summation.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// First 100 primes, bases for the Halton coordinates.
const PRIMES: [u64; 100] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419,
    421, 431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541,
];

/// Maximum supported Halton dimension.
pub const MAX_DIM: usize = PRIMES.len();

/// One marginal distribution of the parameter vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marginal {
    StandardNormal,
    Normal { mean: f64, sd: f64 },
}

impl Marginal {
    pub fn mean(&self) -> f64 {
        match self {
            Marginal::StandardNormal => 0.0,
            Marginal::Normal { mean, .. } => *mean,
        }
    }

    pub fn sd(&self) -> f64 {
        match self {
            Marginal::StandardNormal => 1.0,
            Marginal::Normal { sd, .. } => *sd,
        }
    }

    fn dist(&self) -> Normal {
        Normal::new(self.mean(), self.sd()).expect("marginal sd must be positive")
    }

    /// Inverse CDF of the marginal.
    pub fn inverse_cdf(&self, p: f64) -> f64 {
        self.dist().inverse_cdf(p)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.dist().cdf(x)
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let m = self.mean();
        let s = self.sd();
        let z = (x - m) / s;
        -0.5 * z * z - s.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
    }
}

/// The space of random inputs: independent marginals over each coordinate.
#[derive(Debug, Clone)]
pub struct ParameterSpace {
    marginals: Vec<Marginal>,
}

impl ParameterSpace {
    /// Builds a space from its marginals. Panics on an empty list or a
    /// non-positive sd; those are construction bugs, not runtime conditions.
    pub fn new(marginals: Vec<Marginal>) -> Self {
        assert!(!marginals.is_empty(), "parameter space needs dim >= 1");
        for m in &marginals {
            assert!(m.sd() > 0.0, "marginal sd must be positive");
        }
        Self { marginals }
    }

    /// `dim` independent standard normal coordinates.
    pub fn standard_normal(dim: usize) -> Self {
        Self::new(vec![Marginal::StandardNormal; dim])
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, j: usize) -> &Marginal {
        &self.marginals[j]
    }

    /// Joint log density (independent marginals).
    pub fn log_density(&self, alpha: &[f64]) -> f64 {
        assert_eq!(alpha.len(), self.dim());
        alpha
            .iter()
            .zip(&self.marginals)
            .map(|(x, m)| m.log_density(*x))
            .sum()
    }

    /// Draws one pseudo-random point from the joint distribution.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.marginals
            .iter()
            .map(|m| {
                let d = rand_distr::Normal::new(m.mean(), m.sd()).unwrap();
                rng.sample(d)
            })
            .collect()
    }
}

/// A point set with non-negative quadrature weights summing to one.
#[derive(Debug, Clone)]
pub struct WeightedSampleSet {
    pub samples: DMatrix<f64>,
    pub weights: Vec<f64>,
    pub generator_tag: String,
    pub seed: u64,
}

impl WeightedSampleSet {
    pub fn new(
        samples: DMatrix<f64>,
        weights: Vec<f64>,
        generator_tag: impl Into<String>,
        seed: u64,
    ) -> Result<Self> {
        let set = Self {
            samples,
            weights,
            generator_tag: generator_tag.into(),
            seed,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks weight non-negativity, unit sum to 1e-12, and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.samples.nrows() != self.weights.len() || self.weights.is_empty() {
            return Err(Error::ShapeMismatch {
                left: self.samples.nrows(),
                right: self.weights.len(),
            });
        }
        for (i, w) in self.weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::NonFiniteInput { index: i });
            }
        }
        for (i, v) in self.samples.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteInput { index: i });
            }
        }
        let total = neumaier_sum(self.weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "weights sum to {total}, expected 1 within 1e-12"
            )));
        }
        Ok(())
    }
}

/// Radical inverse of `index` in `base` with a digit permutation applied.
/// The permutation must fix 0 so trailing zero digits contribute nothing.
fn radical_inverse(mut index: u64, base: u64, perm: &[u64]) -> f64 {
    debug_assert_eq!(perm.len() as u64, base);
    debug_assert_eq!(perm[0], 0);
    let inv_base = 1.0 / base as f64;
    let mut factor = inv_base;
    let mut value = 0.0;
    while index > 0 {
        let digit = (index % base) as usize;
        value += perm[digit] as f64 * factor;
        factor *= inv_base;
        index /= base;
    }
    value
}

/// Seeded random permutation of the digit set of `base`, fixing 0.
fn digit_permutation(base: u64, seed: u64, column: usize) -> Vec<u64> {
    let mut perm: Vec<u64> = (0..base).collect();
    // Independent stream per column so earlier columns do not change with dim.
    let stream = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(column as u64 + 1));
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    perm[1..].shuffle(&mut rng);
    perm
}

fn identity_permutation(base: u64) -> Vec<u64> {
    (0..base).collect()
}

fn halton_with_permutations(n: usize, dim: usize, perms: &[Vec<u64>]) -> DMatrix<f64> {
    let mut points = DMatrix::zeros(n, dim);
    for j in 0..dim {
        let base = PRIMES[j];
        for i in 0..n {
            points[(i, j)] = radical_inverse(i as u64 + 1, base, &perms[j]);
        }
    }
    points
}

/// Permutation-scrambled Halton points in the open unit cube, one row per
/// point. Deterministic for a fixed seed.
pub fn generate_halton(n: usize, dim: usize, seed: u64) -> Result<DMatrix<f64>> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
    }
    assert!(n >= 1, "need at least one point");
    let perms: Vec<Vec<u64>> = (0..dim)
        .map(|j| digit_permutation(PRIMES[j], seed, j))
        .collect();
    Ok(halton_with_permutations(n, dim, &perms))
}

/// Plain (identity-permutation) Halton points, for reference and tests.
pub fn generate_halton_plain(n: usize, dim: usize) -> Result<DMatrix<f64>> {
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::UnsupportedDimension { dim, max: MAX_DIM });
    }
    let perms: Vec<Vec<u64>> = (0..dim).map(|j| identity_permutation(PRIMES[j])).collect();
    Ok(halton_with_permutations(n, dim, &perms))
}

/// Maps unit-cube points through the marginal inverse CDFs, column by column.
pub fn transform_to_distribution(
    unit_points: &DMatrix<f64>,
    space: &ParameterSpace,
) -> Result<DMatrix<f64>> {
    assert_eq!(unit_points.ncols(), space.dim(), "column count must match dim");
    let mut out = DMatrix::zeros(unit_points.nrows(), unit_points.ncols());
    for j in 0..unit_points.ncols() {
        let marginal = space.marginal(j);
        for i in 0..unit_points.nrows() {
            let p = unit_points[(i, j)];
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::UnitCoordinateOutOfRange {
                    row: i,
                    col: j,
                    value: p,
                });
            }
            out[(i, j)] = marginal.inverse_cdf(p);
        }
    }
    Ok(out)
}

const PROBE_BLOCK: usize = 8192;

/// Estimates Voronoi cell probabilities by probe sampling: weight i is the
/// fraction of probe draws from the joint density whose nearest sample (in
/// sd-standardized Euclidean distance) is sample i.
///
/// Probe blocks carry their own seeded streams and are merged in fixed block
/// order, so the result does not depend on thread scheduling.
pub fn compute_voronoi_weights(
    alpha_samples: &DMatrix<f64>,
    space: &ParameterSpace,
    n_probe: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    use rayon::prelude::*;

    let n = alpha_samples.nrows();
    let dim = alpha_samples.ncols();
    assert!(n >= 1 && n_probe >= 1);
    assert_eq!(dim, space.dim());
    if n_probe < 100 * n {
        log::warn!("n_probe = {n_probe} is below the recommended 100 * n = {}", 100 * n);
    }

    let inv_sd: Vec<f64> = (0..dim).map(|j| 1.0 / space.marginal(j).sd()).collect();
    let standardized: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..dim).map(|j| alpha_samples[(i, j)] * inv_sd[j]).collect())
        .collect();
    for a in 0..n {
        for b in (a + 1)..n {
            if standardized[a] == standardized[b] {
                return Err(Error::DuplicateSamples { first: a, second: b });
            }
        }
    }

    let n_blocks = n_probe.div_ceil(PROBE_BLOCK);
    let block_counts: Vec<Vec<u64>> = (0..n_blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed.wrapping_add(0xd1b5_4a32_d192_ed03u64.wrapping_mul(block as u64 + 1)),
            );
            let block_len = PROBE_BLOCK.min(n_probe - block * PROBE_BLOCK);
            let mut counts = vec![0u64; n];
            let mut probe = vec![0.0f64; dim];
            for _ in 0..block_len {
                let draw = space.sample(&mut rng);
                for j in 0..dim {
                    probe[j] = draw[j] * inv_sd[j];
                }
                let mut best = 0usize;
                let mut best_d2 = f64::INFINITY;
                for (i, s) in standardized.iter().enumerate() {
                    let mut d2 = 0.0;
                    for j in 0..dim {
                        let d = probe[j] - s[j];
                        d2 += d * d;
                    }
                    if d2 < best_d2 {
                        best_d2 = d2;
                        best = i;
                    }
                }
                counts[best] += 1;
            }
            counts
        })
        .collect();

    let mut counts = vec![0u64; n];
    for block in &block_counts {
        for (c, b) in counts.iter_mut().zip(block) {
            *c += *b;
        }
    }
    let total: u64 = counts.iter().sum();
    let raw: Vec<f64> = counts.iter().map(|c| *c as f64 / total as f64).collect();
    let sum = neumaier_sum(raw.iter().copied());
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Weighted quadrature Σ w_i f_i with compensated accumulation.
pub fn quadrature(f_values: &[f64], weights: &[f64]) -> Result<f64> {
    if f_values.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            left: f_values.len(),
            right: weights.len(),
        });
    }
    for (i, f) in f_values.iter().enumerate() {
        if !f.is_finite() {
            return Err(Error::NonFiniteInput { index: i });
        }
    }
    Ok(neumaier_sum(
        f_values.iter().zip(weights).map(|(f, w)| f * w),
    ))
}

/// Neumaier compensated summation in the iterator's order.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
