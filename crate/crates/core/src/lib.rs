//! Constant-curvature conic metrics on the 2-sphere.
//!
//! The crate builds curvature-one metrics with prescribed cone points in
//! three ways: closed-form footballs ([`football`]), doubled spherical
//! triangles ([`polytope`]) and a Newton solver for the singular Liouville
//! equation in a stereographic chart ([`liouville`]). On top of these sit the
//! superlevel-set diagnostics of [`levelset`] and the degeneration
//! experiments of [`convergence`].

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod convergence;
pub mod divisor;
pub mod error;
pub mod field;
pub mod football;
pub mod geometry;
pub mod levelset;
pub mod io;
pub mod liouville;
mod parallel;
pub mod polytope;
pub mod quadrature;

pub use divisor::{classify, ClassKind, ConePoint, Divisor, DivisorClass, Point, Position};
pub use error::{Error, Result};
pub use football::FootballMetric;
