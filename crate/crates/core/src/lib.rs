//! Invariant Einstein metrics on `G/H × [0, 1]` with prescribed boundary
//! metrics.
//!
//! * [`geometry`]: structure data, sampled metric paths, Ricci residuals and
//!   the Bianchi drift check;
//! * [`torus`]: the exact solver for flat fibres;
//! * [`general`]: homotopy continuation on a Green-function fixed-point map,
//!   plus a shooting solver used as a cross-check and polisher;
//! * [`casestudies`]: torus rescaling and the `S¹ × S²` length obstruction.
//!
//! The math modules are generic over [`Real`]; the `f64` aliases below are
//! what most callers want.

// Negated comparisons reject NaN on purpose; index loops mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod casestudies;
pub mod error;
pub mod general;
pub mod geometry;
pub mod quadrature;
pub mod scalar;
pub mod stencil;
pub mod torus;

pub use error::{Error, Result};
pub use geometry::{em3_lambda, residual_report, rr_ricci_coeff, tangential_ricci_coeff, Verdict, DEFAULT_TOLERANCE};
pub use scalar::Real;

pub type SpaceData = geometry::SpaceData<f64>;
pub type BoundarySpec = geometry::BoundarySpec<f64>;
pub type MetricPath = geometry::MetricPath<f64>;
pub type ResidualReport = geometry::ResidualReport<f64>;
pub type TraceBranch = torus::TraceBranch<f64>;
pub type TorusSolution = torus::TorusSolution<f64>;
pub type S1S2Config = casestudies::S1S2Config<f64>;

pub type SpaceData32 = geometry::SpaceData<f32>;
pub type BoundarySpec32 = geometry::BoundarySpec<f32>;
pub type MetricPath32 = geometry::MetricPath<f32>;
pub type TorusSolution32 = torus::TorusSolution<f32>;
