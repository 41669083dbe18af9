//! Integration against the covariance measure and Malliavin/Skorohod calculus on grids.
//!
//! Deterministic integrands are step functions on the grid cells. The geometry of the
//! Wiener integral (`⟨φ, ψ⟩_H = ∫∫ φ ⊗ ψ dμ`) is generic over [`Scalar`](crate::Scalar);
//! everything that touches sampled paths works in `f64`.

mod cylindrical;
mod inner;
mod montecarlo;
mod regularization;
mod smooth;
mod step;
mod trace;

pub use cylindrical::{
    commutation_check, duality_check, fubini_check, integration_by_parts_check, malliavin_derivative,
    product_rule_gap, skorohod_cylindrical, skorohod_variance_check, CylindricalFunctional, DualityReport,
    ElementaryProcess,
};
pub use inner::{h_abs_norm, h_inner, l2_lebesgue_norm, l2_nu_norm, lebesgue_ratio_scan, variance_split_check};
pub use montecarlo::{pairwise_sum, MonteCarloEstimate};
pub use regularization::{
    backward_integral, covariation, forward_integral, symmetric_integral, wiener_integral, Integrand,
};
pub use smooth::{Profile, SmoothFn};
pub use step::StepFunction;
pub use trace::{skorohod_via_trace, trace_weights};
