//! Quotient-form conditional estimators: likelihood-weighted conditional
//! mean, variance, and kernel-smoothed PDF of a response given selected key
//! measurement conditions, plus non-conditional baselines and degeneracy
//! diagnostics.
//!
//! Likelihoods are handled in log space end to end; exponentiation happens
//! only after subtracting the maximum log likelihood, and the prior
//! quadrature weights multiply in linear space so a constant likelihood
//! reduces bitwise to the non-conditional estimator.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::QoISpec;
use crate::error::{Error, Result};
use crate::measurement::{
    gaussian_error_logpdf, KeyConditionSelection, MeasurementModel, MeasurementSet,
};
use crate::pipeline::ResponseDatabase;
use crate::sampling::{
    compute_voronoi_weights, generate_halton, neumaier_sum, transform_to_distribution,
    ParameterSpace,
};

/// Default minimum effective sample size before the conditional estimators
/// refuse to answer.
pub const DEFAULT_ESS_MIN: f64 = 5.0;

/// Default number of PDF grid points.
pub const DEFAULT_GRID_POINTS: usize = 400;

/// Conditional statistics of one (QoI, step) query.
#[derive(Debug, Clone, PartialEq)]
pub struct KcqResult {
    pub qoi: QoISpec,
    pub step: usize,
    pub mean: f64,
    pub variance: f64,
    pub sd: f64,
    pub pdf_grid: Vec<f64>,
    pub pdf_values: Vec<f64>,
    pub ess: f64,
    pub bandwidth: f64,
}

/// Likelihood-weighted moments of a value vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub ess: f64,
}

/// Normalized-in-shape likelihood weights W_i = w_i exp(loglik_i - max):
/// the quotient estimators are invariant to the dropped constant factor.
fn likelihood_weights(weights: &[f64], loglik: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != loglik.len() {
        return Err(Error::ShapeMismatch {
            left: weights.len(),
            right: loglik.len(),
        });
    }
    if let Some(i) = loglik.iter().position(|l| l.is_nan()) {
        return Err(Error::NonFiniteInput { index: i });
    }
    let max = loglik.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        // Every likelihood underflowed to zero even in log space.
        return Err(Error::DegenerateLikelihood {
            ess: 0.0,
            threshold: 0.0,
            context: "all log likelihoods are -inf".into(),
        });
    }
    Ok(weights
        .iter()
        .zip(loglik)
        .map(|(w, l)| w * (l - max).exp())
        .collect())
}

fn ess_of(w: &[f64]) -> f64 {
    let sum = neumaier_sum(w.iter().copied());
    let sum_sq = neumaier_sum(w.iter().map(|v| v * v));
    if sum_sq > 0.0 {
        sum * sum / sum_sq
    } else {
        0.0
    }
}

/// Conditional mean/variance/ess of `values` under prior weights and log
/// likelihoods. `ess_min` guards against likelihood degeneracy; the guard is
/// capped at the sample count so tiny ensembles remain answerable.
pub fn conditional_moments(
    weights: &[f64],
    loglik: &[f64],
    values: &[f64],
    ess_min: f64,
) -> Result<Moments> {
    if values.len() != weights.len() {
        return Err(Error::ShapeMismatch {
            left: values.len(),
            right: weights.len(),
        });
    }
    let w = likelihood_weights(weights, loglik)?;
    let ess = ess_of(&w);
    // Cap the guard for tiny ensembles, whose prior ess may already sit
    // below the default threshold.
    let threshold = ess_min.min(0.5 * weights.len() as f64);
    if ess < threshold {
        return Err(Error::DegenerateLikelihood {
            ess,
            threshold,
            context: "conditional moments".into(),
        });
    }
    let total = neumaier_sum(w.iter().copied());
    let mean = neumaier_sum(w.iter().zip(values).map(|(wi, g)| wi * g)) / total;
    // Centered two-pass form; clamp tiny negative rounding residue.
    let mut variance =
        neumaier_sum(w.iter().zip(values).map(|(wi, g)| wi * (g - mean) * (g - mean))) / total;
    if variance < 0.0 && variance >= -1e-14 * mean * mean {
        variance = 0.0;
    }
    Ok(Moments {
        mean,
        variance,
        ess,
    })
}

/// Log likelihoods of the selected conditions for every database sample:
/// entry i = log rho_beta(z - h_k(alpha_i)).
pub fn log_likelihoods(db: &ResponseDatabase, sel: &KeyConditionSelection) -> Result<Vec<f64>> {
    let n = db.n();
    let n_k = sel.entries.len();
    for &(i, _) in &sel.entries {
        if i == 0 || i > db.n_steps() {
            return Err(Error::DatabaseCoverage(format!(
                "selected step {i} outside 1..={}",
                db.n_steps()
            )));
        }
    }
    let mut out = Vec::with_capacity(n);
    let mut h = DVector::zeros(n_k);
    for sample in 0..n {
        for (m, &(i, j)) in sel.entries.iter().enumerate() {
            h[m] = db.sensor_channel(j)?.values[(sample, i)];
        }
        out.push(gaussian_error_logpdf(&(&sel.z - h.clone()), sel)?);
    }
    Ok(out)
}

/// Log weights log w_i + log rho_beta(z - h_k(alpha_i)); the summands of the
/// quotient estimators' numerator and denominator.
pub fn likelihood_logweights(
    db: &ResponseDatabase,
    sel: &KeyConditionSelection,
) -> Result<Vec<f64>> {
    let loglik = log_likelihoods(db, sel)?;
    Ok(db
        .sample_set
        .weights
        .iter()
        .zip(loglik)
        .map(|(w, l)| w.ln() + l)
        .collect())
}

fn qoi_column(db: &ResponseDatabase, qoi: &QoISpec, k: usize) -> Result<Vec<f64>> {
    if k > db.n_steps() {
        return Err(Error::DatabaseCoverage(format!(
            "step {k} outside 0..={}",
            db.n_steps()
        )));
    }
    Ok(db.qoi_channel(qoi)?.values.column(k).iter().copied().collect())
}

/// Conditional mean of the QoI at step k given the selected conditions.
pub fn kcq_mean(
    db: &ResponseDatabase,
    sel: &KeyConditionSelection,
    qoi: &QoISpec,
    k: usize,
) -> Result<f64> {
    let g = qoi_column(db, qoi, k)?;
    let loglik = log_likelihoods(db, sel)?;
    Ok(conditional_moments(&db.sample_set.weights, &loglik, &g, DEFAULT_ESS_MIN)?.mean)
}

/// Conditional variance around a mean produced by [`kcq_mean`] on the same
/// inputs.
pub fn kcq_variance(
    db: &ResponseDatabase,
    sel: &KeyConditionSelection,
    qoi: &QoISpec,
    k: usize,
    mean: f64,
) -> Result<f64> {
    let g = qoi_column(db, qoi, k)?;
    let loglik = log_likelihoods(db, sel)?;
    let m = conditional_moments(&db.sample_set.weights, &loglik, &g, DEFAULT_ESS_MIN)?;
    debug_assert!((m.mean - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
    Ok(m.variance)
}

/// Silverman-style bandwidth from the conditional sd and the effective
/// sample size; returns (sigma, floored).
pub fn bandwidth_rule(sd: f64, ess: f64) -> (f64, bool) {
    let floor = 1e-4 * (sd + f64::MIN_POSITIVE);
    let sigma = 1.06 * sd * ess.powf(-0.2);
    if sigma > floor {
        (sigma, false)
    } else {
        (floor, true)
    }
}

/// Kernel bandwidth for the conditional PDF of (qoi, k).
pub fn select_bandwidth(
    db: &ResponseDatabase,
    sel: &KeyConditionSelection,
    qoi: &QoISpec,
    k: usize,
) -> Result<(f64, bool)> {
    let g = qoi_column(db, qoi, k)?;
    let loglik = log_likelihoods(db, sel)?;
    let m = conditional_moments(&db.sample_set.weights, &loglik, &g, DEFAULT_ESS_MIN)?;
    Ok(bandwidth_rule(m.variance.sqrt(), m.ess))
}

/// Uniform grid spanning mean ± 6 sd with at least [`DEFAULT_GRID_POINTS`]
/// points.
pub fn default_grid(mean: f64, sd: f64, points: usize) -> Vec<f64> {
    let points = points.max(DEFAULT_GRID_POINTS);
    let half = 6.0 * if sd > 0.0 { sd } else { 1e-6 + mean.abs() * 1e-6 };
    let lo = mean - half;
    let step = 2.0 * half / (points - 1) as f64;
    (0..points).map(|i| lo + i as f64 * step).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    for i in 1..grid.len() {
        if !(grid[i] > grid[i - 1]) {
            return Err(Error::GridNotIncreasing { index: i });
        }
    }
    Ok(())
}

/// Gaussian-kernel density of `centers` with weights `w` (any positive
/// scale) on `grid`.
pub fn weighted_kde(grid: &[f64], centers: &[f64], w: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if centers.len() != w.len() {
        return Err(Error::ShapeMismatch {
            left: centers.len(),
            right: w.len(),
        });
    }
    check_grid(grid)?;
    assert!(sigma > 0.0, "bandwidth must be positive");
    let total = neumaier_sum(w.iter().copied());
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma * total);
    Ok(grid
        .par_iter()
        .map(|u| {
            neumaier_sum(centers.iter().zip(w).map(|(c, wi)| {
                let z = (u - c) / sigma;
                wi * (-0.5 * z * z).exp()
            })) * norm
        })
        .collect())
}

/// Conditional PDF of the QoI at step k on the given grid.
pub fn kcq_pdf(
    db: &ResponseDatabase,
    sel: &KeyConditionSelection,
    qoi: &QoISpec,
    k: usize,
    grid: &[f64],
    sigma: f64,
) -> Result<Vec<f64>> {
    let g = qoi_column(db, qoi, k)?;
    let loglik = log_likelihoods(db, sel)?;
    let w = likelihood_weights(&db.sample_set.weights, &loglik)?;
    let ess = ess_of(&w);
    let threshold = DEFAULT_ESS_MIN.min(0.5 * db.n() as f64);
    if ess < threshold {
        return Err(Error::DegenerateLikelihood {
            ess,
            threshold,
            context: "conditional PDF".into(),
        });
    }
    weighted_kde(grid, &g, &w, sigma)
}

/// Full conditional quantification of one (QoI, step) query: moments,
/// bandwidth, and PDF on the default grid.
pub fn kcq_quantify(
    db: &ResponseDatabase,
    sel: &KeyConditionSelection,
    qoi: &QoISpec,
    k: usize,
    grid_points: usize,
) -> Result<KcqResult> {
    let g = qoi_column(db, qoi, k)?;
    let loglik = log_likelihoods(db, sel)?;
    quantify_with_loglik(db, &loglik, qoi, k, &g, grid_points)
}

fn quantify_with_loglik(
    db: &ResponseDatabase,
    loglik: &[f64],
    qoi: &QoISpec,
    k: usize,
    g: &[f64],
    grid_points: usize,
) -> Result<KcqResult> {
    let m = conditional_moments(&db.sample_set.weights, loglik, g, DEFAULT_ESS_MIN)?;
    let sd = m.variance.sqrt();
    let (bandwidth, _) = bandwidth_rule(sd, m.ess);
    let pdf_grid = default_grid(m.mean, sd, grid_points);
    let w = likelihood_weights(&db.sample_set.weights, loglik)?;
    let pdf_values = weighted_kde(&pdf_grid, g, &w, bandwidth)?;
    Ok(KcqResult {
        qoi: *qoi,
        step: k,
        mean: m.mean,
        variance: m.variance,
        sd,
        pdf_grid,
        pdf_values,
        ess: m.ess,
        bandwidth,
    })
}

/// Non-conditional baseline: the same estimators with the likelihood
/// identically one, so the quotient reduces to plain GQMC quadrature.
pub fn nonconditional_stats(
    db: &ResponseDatabase,
    qoi: &QoISpec,
    k: usize,
    grid_points: usize,
) -> Result<KcqResult> {
    let g = qoi_column(db, qoi, k)?;
    let loglik = vec![0.0; db.n()];
    quantify_with_loglik(db, &loglik, qoi, k, &g, grid_points)
}

/// Conditions on ALL measurement cells through step k (the selector is the
/// identity). Exists to exhibit likelihood degeneracy: the collapse is
/// reported through the returned ess, never raised.
pub fn full_chain_cq_diagnostic(
    db: &ResponseDatabase,
    meas: &MeasurementSet,
    qoi: &QoISpec,
    k: usize,
) -> Result<(f64, f64, f64)> {
    let model: &MeasurementModel = &meas.model;
    let n_m = model.n_points();
    let entries: Vec<(usize, usize)> = (1..=k)
        .flat_map(|i| (0..n_m).map(move |j| (i, j)))
        .collect();
    let n_cond = entries.len();
    let z = DVector::from_iterator(n_cond, entries.iter().map(|&(i, j)| meas.value(i, j)));
    let mu_beta = DVector::from_iterator(n_cond, entries.iter().map(|&(_, j)| model.noise_mean[j]));
    let r_beta = nalgebra::DMatrix::from_diagonal(&DVector::from_iterator(
        n_cond,
        entries
            .iter()
            .map(|&(_, j)| model.noise_sd[j] * model.noise_sd[j]),
    ));
    let sel = KeyConditionSelection {
        entries,
        z,
        mu_beta,
        r_beta,
        correlations: vec![f64::NAN; n_cond],
    };
    let g = qoi_column(db, qoi, k)?;
    let loglik = log_likelihoods(db, &sel)?;
    let w = likelihood_weights(&db.sample_set.weights, &loglik).unwrap_or_else(|_| vec![0.0; db.n()]);
    let ess = ess_of(&w);
    let total = neumaier_sum(w.iter().copied());
    if total <= 0.0 {
        return Ok((f64::NAN, f64::NAN, ess));
    }
    let mean = neumaier_sum(w.iter().zip(&g).map(|(wi, gi)| wi * gi)) / total;
    let variance =
        neumaier_sum(w.iter().zip(&g).map(|(wi, gi)| wi * (gi - mean) * (gi - mean))) / total;
    Ok((mean, variance, ess))
}

/// Outcome of [`conservation_identity_check`].
#[derive(Debug, Clone)]
pub struct ConservationCheck {
    pub grid: Vec<f64>,
    /// GQMC-weighted kernel density of f(alpha).
    pub weighted_pdf: Vec<f64>,
    /// Pseudo-random reference density with the same kernel.
    pub mc_pdf: Vec<f64>,
    pub max_gap: f64,
}

/// Checks the pushforward-density identity: the kernel-smoothed density of
/// zeta = f(alpha) computed with GQMC quadrature weights must agree with the
/// same density estimated from `n_mc` pseudo-random draws.
pub fn conservation_identity_check(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    space: &ParameterSpace,
    n: usize,
    sigma: f64,
    seed: u64,
    n_mc: usize,
) -> Result<ConservationCheck> {
    let dim = space.dim();
    let unit = generate_halton(n, dim, seed)?;
    let samples = transform_to_distribution(&unit, space)?;
    let weights = compute_voronoi_weights(&samples, space, 100 * n, seed.wrapping_add(1))?;
    let zeta: Vec<f64> = (0..n)
        .map(|i| {
            let row: Vec<f64> = samples.row(i).iter().copied().collect();
            f(&row)
        })
        .collect();

    let mean = neumaier_sum(zeta.iter().zip(&weights).map(|(z, w)| z * w));
    let var = neumaier_sum(
        zeta.iter()
            .zip(&weights)
            .map(|(z, w)| w * (z - mean) * (z - mean)),
    )
    .max(0.0);
    // The grid must cover the kernel even when f is (nearly) constant.
    let grid = default_grid(mean, var.sqrt().max(sigma), 401);
    let weighted_pdf = weighted_kde(&grid, &zeta, &weights, sigma)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let mc_zeta: Vec<f64> = (0..n_mc)
        .map(|_| {
            let alpha: Vec<f64> = (0..dim)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    space.marginal(j).mean() + space.marginal(j).sd() * z
                })
                .collect();
            f(&alpha)
        })
        .collect();
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma * n_mc as f64);
    let mc_pdf: Vec<f64> = grid
        .par_iter()
        .map(|u| {
            let mut acc = 0.0;
            for c in &mc_zeta {
                let z = (u - c) / sigma;
                acc += (-0.5 * z * z).exp();
            }
            acc * norm
        })
        .collect();

    let max_gap = weighted_pdf
        .iter()
        .zip(&mc_pdf)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(ConservationCheck {
        grid,
        weighted_pdf,
        mc_pdf,
        max_gap,
    })
}

/// Trapezoid integral of density values over a grid.
pub fn trapezoid(grid: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..grid.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (grid[i] - grid[i - 1]);
    }
    acc
}
