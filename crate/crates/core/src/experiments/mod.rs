//! Strong-error evaluation, deterministic convergence studies and rate fits.

pub mod deterministic;
pub mod rate;
pub mod strong;

pub use deterministic::{
    deterministic_curve, deterministic_rate_study, space_error_sq, time_error_sq,
    DeterministicProp, Refinement,
};
pub use rate::{rate_regression, ErrorCurve, ParameterKind, RateReport};
pub use strong::{
    mc_strong_error, monte_carlo, noise_intervals, strong_error_exact_full,
    strong_error_exact_time, McSetup, Reference,
};
