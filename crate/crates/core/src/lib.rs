//! Numerical laboratory for two-dimensional maps with a quadratic homoclinic
//! tangency that host infinitely many coexisting asymptotically stable
//! single-round periodic orbits.
//!
//! * [`map`]: the piecewise-smooth map family, its Jacobian and the resonant
//!   normal-form iterate.
//! * [`orbit`]: closed-form and Newton computation of single-round orbits.
//! * [`stability`]: monodromy matrices and trace/determinant classification.
//! * [`theory`]: hypothesis checks and growth-rate diagnostics.
//! * [`manifold`]: stable and unstable manifolds of the saddle at the origin.
//! * [`basin`]: basin-of-attraction rasters and their PPM/CSV output.

// `!(a <= b)` is used on purpose so that NaN takes the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basin;
pub mod exec;
pub mod io;
pub mod manifold;
pub mod map;
pub mod orbit;
pub mod stability;
pub mod theory;

pub use exec::Execution;
pub use map::{MapParams, ParamSet, Point2, Region};
pub use orbit::{Branch, SrkOrbit};
pub use stability::StabilityClass;
