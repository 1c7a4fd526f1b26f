//! Conditional uncertainty quantification of stochastic structural dynamical
//! responses given noisy measurement data.
//!
//! The library combines four building blocks:
//!
//! * [`sampling`] — scrambled-Halton low-discrepancy point sets with
//!   Voronoi-probe quadrature weights (the generalized quasi-Monte Carlo
//!   engine);
//! * [`dynamics`] — dynamical systems integrated with the implicit symplectic
//!   Euler midpoint scheme, including the built-in mass-spring-damper and the
//!   geometrically nonlinear cantilever beam;
//! * [`measurement`] + [`estimators`] — correlation-ranked key-condition
//!   selection and the quotient-form conditional mean / variance / PDF
//!   estimators with likelihood weights handled in log space;
//! * [`pipeline`] — the offline database generation and online conditional
//!   quantification stages, with a lossless on-disk database format.
//!
//! [`oracle`] holds slow reference implementations (pseudo-random Monte Carlo
//! databases and exact grid posteriors) used by tests and acceptance runs.

pub mod dynamics;
pub mod error;
pub mod estimators;
pub mod measurement;
pub mod oracle;
pub mod pipeline;
pub mod randomfield;
pub mod sampling;

pub use error::{Error, Result};
