//! Noisy measurement modeling: synthetic measurement records, correlation
//! ranking of measurement cells against a response, key-condition selection,
//! and the Gaussian error statistics of selected conditions.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dynamics::{qoi_value, DynamicalSystem, QoISpec, StateTrajectory};
use crate::error::{Error, Result};
use crate::pipeline::ResponseDatabase;
use crate::sampling::neumaier_sum;

/// Noise standard deviations below this are treated as "noise off".
pub const NOISE_OFF_SD: f64 = 1e-150;

/// Sensor layout with an independent Gaussian error process per point.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    pub points: Vec<QoISpec>,
    pub noise_mean: Vec<f64>,
    pub noise_sd: Vec<f64>,
}

impl MeasurementModel {
    pub fn new(points: Vec<QoISpec>, noise_mean: Vec<f64>, noise_sd: Vec<f64>) -> Result<Self> {
        if points.len() != noise_mean.len() || points.len() != noise_sd.len() {
            return Err(Error::ShapeMismatch {
                left: points.len(),
                right: noise_mean.len().max(noise_sd.len()),
            });
        }
        if let Some(i) = noise_sd.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::Config(format!(
                "noise sd at sensor {i} must be positive"
            )));
        }
        Ok(Self {
            points,
            noise_mean,
            noise_sd,
        })
    }

    /// Zero-mean noise with the given per-point standard deviations.
    pub fn zero_mean(points: Vec<QoISpec>, noise_sd: Vec<f64>) -> Result<Self> {
        let noise_mean = vec![0.0; points.len()];
        Self::new(points, noise_mean, noise_sd)
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }
}

/// Measured values over the time-step × measurement-point grid; row i-1
/// holds the measurements taken at step i (steps are 1-based, step 0 being
/// the known initial condition).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub values: DMatrix<f64>,
    pub model: MeasurementModel,
}

impl MeasurementSet {
    /// Largest step index covered.
    pub fn max_step(&self) -> usize {
        self.values.nrows()
    }

    /// Measured value of sensor `j` at step `i` (1-based).
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1, j)]
    }
}

/// Synthesizes a measurement record from a true trajectory: sensor reads
/// plus independent Gaussian noise draws. Deterministic for a fixed seed.
pub fn simulate_measurements(
    true_traj: &StateTrajectory,
    model: &MeasurementModel,
    system: &DynamicalSystem,
    seed: u64,
) -> Result<MeasurementSet> {
    let k_max = true_traj.times.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = DMatrix::zeros(k_max, model.n_points());
    for i in 1..=k_max {
        for (j, spec) in model.points.iter().enumerate() {
            let truth = qoi_value(true_traj, spec, i, system)?;
            let sd = model.noise_sd[j];
            let noise = if sd < NOISE_OFF_SD {
                0.0
            } else {
                let z: f64 = rng.sample(StandardNormal);
                model.noise_mean[j] + sd * z
            };
            values[(i - 1, j)] = truth + noise;
        }
    }
    Ok(MeasurementSet {
        values,
        model: model.clone(),
    })
}

/// Weighted covariance of two equally indexed value slices under weights
/// that sum to one.
fn weighted_cov(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64) {
    let mx = neumaier_sum(x.iter().zip(w).map(|(v, wi)| v * wi));
    let my = neumaier_sum(y.iter().zip(w).map(|(v, wi)| v * wi));
    let cov = neumaier_sum(
        x.iter()
            .zip(y)
            .zip(w)
            .map(|((xi, yi), wi)| wi * (xi - mx) * (yi - my)),
    );
    (mx, my, cov)
}

fn weighted_var(x: &[f64], w: &[f64]) -> f64 {
    let (_, _, v) = weighted_cov(x, x, w);
    v
}

/// Correlation coefficients r_{i,j,k} between every measurement cell
/// (step i in 1..=k, sensor j) and the response `qoi` at step `k`, estimated
/// with the database's quadrature weights. The sensor noise variance enters
/// only the measurement's self-variance (the noise is independent of the
/// structural parameters, so the covariance term is noise-free).
pub fn correlation_coefficients(
    db: &ResponseDatabase,
    qoi: &QoISpec,
    k: usize,
    model: &MeasurementModel,
) -> Result<DMatrix<f64>> {
    if k == 0 || k > db.n_steps() {
        return Err(Error::DatabaseCoverage(format!(
            "step {k} outside 1..={}",
            db.n_steps()
        )));
    }
    if model.n_points() != db.sensor_channels.len() {
        return Err(Error::DatabaseCoverage(format!(
            "{} sensors in the model, {} sensor channels in the database",
            model.n_points(),
            db.sensor_channels.len()
        )));
    }
    let w = &db.sample_set.weights;
    let g: Vec<f64> = db.qoi_channel(qoi)?.values.column(k).iter().copied().collect();
    let var_g = weighted_var(&g, w);
    if var_g <= 0.0 {
        return Err(Error::ZeroVarianceResponse { step: k });
    }
    let mut r = DMatrix::zeros(k, model.n_points());
    for j in 0..model.n_points() {
        let channel = db.sensor_channel(j)?;
        let sd2 = if model.noise_sd[j] < NOISE_OFF_SD {
            0.0
        } else {
            model.noise_sd[j] * model.noise_sd[j]
        };
        for i in 1..=k {
            let h: Vec<f64> = channel.values.column(i).iter().copied().collect();
            let (_, _, cov) = weighted_cov(&h, &g, w);
            let var_h = weighted_var(&h, w);
            let denom = ((var_h + sd2) * var_g).sqrt();
            r[(i - 1, j)] = if denom > 0.0 { cov / denom } else { 0.0 };
        }
    }
    Ok(r)
}

/// The selected key conditions: cell indices, measured values z, and the
/// Gaussian statistics of the selected error vector.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyConditionSelection {
    /// (time step i, point index j) pairs, 1-based steps.
    pub entries: Vec<(usize, usize)>,
    pub z: DVector<f64>,
    pub mu_beta: DVector<f64>,
    pub r_beta: DMatrix<f64>,
    /// The |r| values that ranked the entries, in entry order.
    pub correlations: Vec<f64>,
}

/// Picks the N_k measurement cells with the largest |r|. Ties break toward
/// the larger time index, then the smaller point index.
pub fn select_key_conditions(
    r: &DMatrix<f64>,
    meas: &MeasurementSet,
    n_k: usize,
    model: &MeasurementModel,
) -> Result<KeyConditionSelection> {
    let k = r.nrows();
    let n_m = r.ncols();
    let available = k * n_m;
    if n_k == 0 || n_k > available {
        return Err(Error::SelectionSize {
            requested: n_k,
            available,
        });
    }
    if meas.max_step() < k || meas.model.n_points() != n_m {
        return Err(Error::DatabaseCoverage(format!(
            "measurement set covers {} steps x {} points, correlations need {k} x {n_m}",
            meas.max_step(),
            meas.model.n_points()
        )));
    }
    let mut cells: Vec<(usize, usize, f64)> = (1..=k)
        .flat_map(|i| (0..n_m).map(move |j| (i, j, 0.0)))
        .collect();
    for cell in &mut cells {
        cell.2 = r[(cell.0 - 1, cell.1)].abs();
    }
    cells.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then(b.0.cmp(&a.0))
            .then(a.1.cmp(&b.1))
    });
    cells.truncate(n_k);

    let entries: Vec<(usize, usize)> = cells.iter().map(|c| (c.0, c.1)).collect();
    let z = DVector::from_iterator(n_k, cells.iter().map(|c| meas.value(c.0, c.1)));
    let mu_beta = DVector::from_iterator(n_k, cells.iter().map(|c| model.noise_mean[c.1]));
    // Independent errors: diagonal covariance from the per-point sds.
    let r_beta = DMatrix::from_diagonal(&DVector::from_iterator(
        n_k,
        cells.iter().map(|c| model.noise_sd[c.1] * model.noise_sd[c.1]),
    ));
    Ok(KeyConditionSelection {
        entries,
        z,
        mu_beta,
        r_beta,
        correlations: cells.iter().map(|c| c.2).collect(),
    })
}

/// Log density of the selected error vector: a multivariate Gaussian with
/// mean `mu_beta` and covariance `r_beta`, evaluated via Cholesky.
pub fn gaussian_error_logpdf(beta: &DVector<f64>, sel: &KeyConditionSelection) -> Result<f64> {
    let n = sel.r_beta.nrows();
    if beta.len() != n {
        return Err(Error::ShapeMismatch {
            left: beta.len(),
            right: n,
        });
    }
    let chol = nalgebra::Cholesky::new(sel.r_beta.clone())
        .ok_or(Error::NonPositiveDefiniteCovariance)?;
    let log_det: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
    let centered = beta - &sel.mu_beta;
    let y = chol.l().solve_lower_triangular(&centered).unwrap();
    let quad = y.norm_squared();
    Ok(-0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad))
}
