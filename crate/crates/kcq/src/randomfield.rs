//! Truncated Karhunen-Loève representation of a stationary random field with
//! exponential covariance, including the transcendental eigenvalue problem.
//!
//! The covariance domain is the centered interval [-a_K, a_K]; a structure
//! coordinate x in [0, 2 a_K] is mapped to x - a_K before evaluating the
//! eigenfunctions.

use crate::error::{Error, Result};

/// Truncated K-L expansion of the elastic-modulus field.
///
/// `sigma_e` is the relative (coefficient-of-variation) fluctuation scale;
/// fluctuations enter the field value multiplied by `e0`.
#[derive(Debug, Clone)]
pub struct KLField {
    pub e0: f64,
    pub a_k: f64,
    pub c_k: f64,
    pub sigma_e: f64,
    pub order: usize,
    pub omegas: Vec<f64>,
    pub kappas: Vec<f64>,
}

const ROOT_TOL: f64 = 1e-12;

/// Bisection for a strictly bracketing (lo, hi) with f(lo) < 0 < f(hi) or the
/// reverse; tolerance on the abscissa.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, index: usize) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if !(flo.is_finite() && fhi.is_finite()) || flo * fhi > 0.0 {
        return Err(Error::RootBracketing { index });
    }
    let increasing = fhi > flo;
    while hi - lo > ROOT_TOL {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if (fm > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves the parity eigenvalue equations of the exponential covariance:
/// odd index i -> the ((i+1)/2)-th positive root of w tan(a w) = c;
/// even index i -> the (i/2)-th positive root of w = -c tan(a w).
/// Returns (omegas, kappas) with kappa_i = 2 c sigma^2 / (w_i^2 + c^2).
pub fn kl_eigenpairs(a_k: f64, c_k: f64, sigma_e: f64, order: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    assert!(a_k > 0.0 && c_k > 0.0 && sigma_e > 0.0 && order >= 1);
    let pi = std::f64::consts::PI;
    // Keep brackets clear of the tangent poles.
    let margin = 1e-9 / a_k;
    let mut omegas = Vec::with_capacity(order);
    for i in 1..=order {
        let omega = if i % 2 == 1 {
            // w tan(a w) rises from 0 to +inf on ((j-1)pi/a, ((j-1)+1/2)pi/a).
            let j = (i + 1) / 2;
            let lo = (j as f64 - 1.0) * pi / a_k + margin;
            let hi = ((j as f64 - 1.0) + 0.5) * pi / a_k - margin;
            bisect(lo, hi, |w| w * (a_k * w).tan() - c_k, i)?
        } else {
            // w + c tan(a w) rises from -inf to w > 0 on ((j-1/2)pi/a, j pi/a).
            let j = i / 2;
            let lo = (j as f64 - 0.5) * pi / a_k + margin;
            let hi = j as f64 * pi / a_k - margin;
            bisect(lo, hi, |w| w + c_k * (a_k * w).tan(), i)?
        };
        omegas.push(omega);
    }
    let kappas: Vec<f64> = omegas
        .iter()
        .map(|w| 2.0 * c_k * sigma_e * sigma_e / (w * w + c_k * c_k))
        .collect();
    Ok((omegas, kappas))
}

impl KLField {
    pub fn new(e0: f64, a_k: f64, c_k: f64, sigma_e: f64, order: usize) -> Result<Self> {
        let (omegas, kappas) = kl_eigenpairs(a_k, c_k, sigma_e, order)?;
        Ok(Self {
            e0,
            a_k,
            c_k,
            sigma_e,
            order,
            omegas,
            kappas,
        })
    }

    /// Normalized eigenfunction i (1-based) at structure coordinate `x`.
    pub fn eigenfunction(&self, i: usize, x: f64) -> Result<f64> {
        if i == 0 || i > self.order {
            return Err(Error::EigenIndexOutOfRange {
                index: i,
                max: self.order,
            });
        }
        let xm = x - self.a_k;
        let w = self.omegas[i - 1];
        let s2 = (2.0 * w * self.a_k).sin() / (2.0 * w);
        let value = if i % 2 == 1 {
            (w * xm).cos() / (self.a_k + s2).sqrt()
        } else {
            (w * xm).sin() / (self.a_k - s2).sqrt()
        };
        Ok(value)
    }

    /// Relative fluctuation sum_i eps_i sqrt(kappa_i) f_i(x); linear in eps.
    pub fn fluctuation(&self, x: f64, eps: &[f64]) -> f64 {
        assert_eq!(eps.len(), self.order, "eps length must equal the truncation order");
        eps.iter()
            .enumerate()
            .map(|(idx, e)| e * (self.kappas[idx].sqrt() * self.eigenfunction(idx + 1, x).unwrap()))
            .sum()
    }

    /// Field value E(x, eps) = E0 (1 + sum_i eps_i sqrt(kappa_i) f_i(x)).
    pub fn value(&self, x: f64, eps: &[f64]) -> f64 {
        self.e0 * (1.0 + self.fluctuation(x, eps))
    }

    /// Residual of the parity equation for eigenvalue i (diagnostic).
    pub fn parity_residual(&self, i: usize) -> f64 {
        let w = self.omegas[i - 1];
        if i % 2 == 1 {
            w * (self.a_k * w).tan() - self.c_k
        } else {
            w + self.c_k * (self.a_k * w).tan()
        }
    }
}
