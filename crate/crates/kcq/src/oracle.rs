//! Reference implementations for tests and acceptance runs: pseudo-random
//! Monte Carlo databases (same estimator code path, different sample source)
//! and exact Bayes on small discrete grids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::pipeline::{build_from_samples, ResponseDatabase, RunConfig};
use crate::sampling::{neumaier_sum, WeightedSampleSet};

/// Pseudo-random sampling configuration for oracle databases.
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub n_mc: usize,
    pub seed: u64,
}

/// Builds a response database exactly as the offline stage does, but with
/// `n_mc` seeded pseudo-random draws from the parameter distribution and
/// uniform weights 1/n. Journaling is disabled: oracle runs are one-shot.
pub fn mc_sample_database(config: &RunConfig, mc: &McConfig) -> Result<ResponseDatabase> {
    if mc.n_mc == 0 {
        return Err(Error::Config("n_mc must be positive".into()));
    }
    let mut config = config.clone();
    config.out_dir = None;
    config.validate()?;
    let (system, space) = config.system.build()?;
    let dim = space.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let mut samples = DMatrix::zeros(mc.n_mc, dim);
    for i in 0..mc.n_mc {
        let alpha = space.sample(&mut rng);
        for (j, v) in alpha.iter().enumerate() {
            samples[(i, j)] = *v;
        }
    }
    let weights = vec![1.0 / mc.n_mc as f64; mc.n_mc];
    let sample_set = WeightedSampleSet::new(samples, weights, "mc-uniform", mc.seed)?;
    build_from_samples(&config, &system, space, sample_set)
}

/// Exact conditional statistics on a finite grid: posterior mass is
/// prior × likelihood renormalized, moments are exact sums.
/// Returns (mean, variance, posterior pmf).
pub fn brute_force_conditional(
    prior: &[f64],
    response: &[f64],
    likelihood: &[f64],
) -> Result<(f64, f64, Vec<f64>)> {
    let n = prior.len();
    if response.len() != n || likelihood.len() != n {
        return Err(Error::ShapeMismatch {
            left: n,
            right: response.len().max(likelihood.len()),
        });
    }
    for (i, p) in prior.iter().enumerate() {
        if !(p.is_finite() && *p > 0.0) {
            return Err(Error::Config(format!(
                "prior mass at cell {i} must be strictly positive"
            )));
        }
    }
    if let Some(i) = likelihood
        .iter()
        .position(|l| !l.is_finite() || *l < 0.0)
    {
        return Err(Error::NonFiniteInput { index: i });
    }
    let unnormalized: Vec<f64> = prior
        .iter()
        .zip(likelihood)
        .map(|(p, l)| p * l)
        .collect();
    let total = neumaier_sum(unnormalized.iter().copied());
    if !(total > 0.0) {
        return Err(Error::DegeneratePosterior);
    }
    let pmf: Vec<f64> = unnormalized.iter().map(|v| v / total).collect();
    let mean = neumaier_sum(pmf.iter().zip(response).map(|(p, g)| p * g));
    let variance = neumaier_sum(
        pmf.iter()
            .zip(response)
            .map(|(p, g)| p * (g - mean) * (g - mean)),
    );
    Ok((mean, variance, pmf))
}
