//! Grassmann angles and conic intrinsic volumes of polyhedral cones.
//!
//! - [`linalg`]: dense linear algebra, subspaces and seeded random streams.
//! - [`cones`]: cones in generator form and the standard families.
//! - [`feasible`]: projection, membership and relative-interior predicates.
//! - [`exact`]: closed forms and the linear inversions used by estimators.
//! - [`mc`]: parallel, deterministic Monte Carlo estimators and experiments.

pub mod cones;
pub mod error;
pub mod exact;
pub mod feasible;
pub mod linalg;
pub mod mc;

pub use error::{Error, Result};
