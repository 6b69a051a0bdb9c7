//! Zero sets of Kostlan-Shub-Smale (KSS) random polynomial systems.
//!
//! A KSS system is `r` independent Gaussian homogeneous polynomials of degree
//! `d` in `m + 1` variables, with coefficient variances equal to multinomial
//! coefficients. Its zero set on the unit sphere `S^m` is a random
//! `(m - r)`-dimensional submanifold. This crate samples such systems,
//! measures the volume of their zero sets, evaluates the covariance
//! structure and Kac-Rice moments of that volume, computes its Wiener chaos
//! decomposition, and checks the central limit theorem for the standardized
//! volume as the degree grows.
//!
//! Module map:
//!
//! * [`sphere`]: coordinates, tangent frames, icosphere meshes, and the
//!   one-dimensional reduction of rotation-invariant double integrals.
//! * [`kss`]: sampling and evaluation of KSS systems and their jets.
//! * [`covariance`]: the closed-form covariance kernel of `(Y, Y'/sqrt(d))`,
//!   its scaling limits and bounds.
//! * [`chaos`]: Hermite and Mehler machinery, chaos coefficients and the
//!   per-order variance terms.
//! * [`volume`]: marching-triangle and Crofton estimators of zero-set length,
//!   and root counting on circles.
//! * [`kac_rice`]: first and second moments of the zero-set volume.
//! * [`limit_field`]: the local scaling limit field and its nodal length.
//! * [`harness`]: replicated experiments, normality tests and reports.
//!
//! ```
//! use kostlan::kac_rice::expected_volume;
//! // Mean nodal length on S^2 is 2 pi sqrt(d).
//! let e = expected_volume(2, 1, 16).unwrap();
//! assert!((e - 8.0 * std::f64::consts::PI).abs() < 1e-9);
//! ```

pub mod chaos;
pub mod covariance;
pub mod error;
pub mod harness;
pub mod kac_rice;
pub mod kss;
pub mod limit_field;
pub mod numeric;
pub mod sphere;
pub mod volume;

pub use error::{Error, Result};
