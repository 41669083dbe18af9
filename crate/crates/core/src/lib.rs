//! Covariance-measure calculus for Gaussian processes on uniform grids.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: covariance kernels `R(s,t)` with their densities, energy and variance curves.
//! * [`grid`] and [`covmeasure`]: the discrete covariance measure built from rectangle
//!   increments of `R` on a uniform grid, and everything that can be read off it.
//! * [`simulate`]: exact Gaussian path sampling from the increment Gram matrix.
//! * [`calculus`]: Wiener, regularization and Skorohod integrals, Malliavin derivatives.
//! * [`verify`]: end-to-end checks (quadratic variation, Itô formulas, chaos of local time).
//!
//! The deterministic layers are generic over [`Scalar`]; the aliases below fix `f64`,
//! which is what the Monte Carlo layers use.

pub mod calculus;
pub mod covmeasure;
pub mod error;
pub mod grid;
pub mod kernels;
pub mod quadrature;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision kernel.
pub type Kernel = kernels::KernelSpec<f64>;
/// Double-precision grid.
pub type Grid = grid::Grid<f64>;
/// Double-precision covariance measure.
pub type Measure = covmeasure::DiscreteMeasure<f64>;
/// Double-precision step function.
pub type Step = calculus::StepFunction<f64>;
