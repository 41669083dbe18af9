//! End-to-end verification suites. Each suite returns a [`Report`] of named checks with
//! their reference values and tolerances.

mod chaos;
mod gamma;
mod hermite;
mod ito;
mod qv;
mod quasihelix;
mod report;

pub use chaos::{
    chaos_local_time, chaos_report, default_width, gaussian_density, isometry_checks, local_time_study,
    occupation_oracle, zeroth_term, ChaosConfig, LocalTimeChaos, LocalTimePoint,
};
pub use gamma::gamma_decomposition_report;
pub use hermite::{hermite, hermite_all, multiple_integral_indicator};
pub use ito::{default_probes, ito_residual, ito_scan, ito_suite, profile_name, ItoReport};
pub use qv::{covariation_expectation, default_eps, qv_report, qv_report_on};
pub use quasihelix::quasi_helix_report;
pub use report::{Check, Param, Report, Series, Tolerances};
