//! A desk-scale numerical laboratory for dyadic harmonic analysis.
//!
//! Everything operates on piecewise-constant functions over finite dyadic
//! grids in one or two dimensions, which makes averages, oscillations and
//! level-set masses exact over the representation. On top of that base the
//! crate provides:
//!
//! - maximal operators (dyadic, exhaustive-interval, shifted-dyadic,
//!   localized), sharp and weak-sharp maximal functions, medians and median
//!   oscillations ([`maximal`]);
//! - weight characteristics: `A_1`, `A_p`, Fujii-Wilson `A_infty`, the
//!   kernel-adapted `B(Omega)` tail condition, and Dini norms of moduli of
//!   continuity ([`weights`]);
//! - the four weighted BMO norms and their comparison checks ([`bmo`]);
//! - sparse families with verified disjoint witnesses, sparse operators,
//!   Carleson sums, and the classical families that separate sparse bounds
//!   from BMO membership ([`sparse`]);
//! - the Rubio de Francia majorant construction and an end-to-end
//!   extrapolation demonstration on weighted Lebesgue spaces
//!   ([`extrapolate`]);
//! - discretized singular integrals with Dini-smooth kernels and a
//!   constructive, fully checked sparse domination certificate ([`czo`]);
//! - a small reporting layer used by the verification CLI ([`report`]).
//!
//! All types are immutable after construction and all operations are pure,
//! so callers may evaluate them concurrently without coordination.

pub mod bmo;
pub mod czo;
pub mod extrapolate;
pub mod grid;
pub mod maximal;
pub mod report;
pub mod sparse;
pub mod stock;
pub mod weights;

mod ksum;

pub use grid::{AvgExponent, Cube, DyadicGrid, GridFunction, LatticeBox};
pub use report::{Check, CheckStatus};

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    /// A box or cube does not lie inside the grid it is used with.
    #[error("region outside grid: {0}")]
    Domain(String),
    /// An argument violates a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),
    /// The operation is not defined for the given configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
