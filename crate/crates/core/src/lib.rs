//! Crank-Nicolson finite element approximation of the stochastic fourth-order
//! parabolic problem
//!
//! ```text
//! v_t + v_xxxx = Ẇ   on (0,T] × (0,1),   v = v_xx = 0 at x ∈ {0,1},
//! ```
//!
//! driven by additive space-time white noise, together with the tooling needed
//! to measure its strong convergence: exact sine-basis solutions, coupled noise
//! sampling, C¹ finite element spaces, the time-stepping schemes, and exact
//! (Gaussian-variance) and Monte Carlo error evaluators.
//!
//! Module map:
//! - [`spectral`]: sine eigenbasis, `Ḣ^s` norms, semigroup, exact `û`, modeling error.
//! - [`noise`]: Wiener increments, coarsening/truncation, the interval-average projection.
//! - [`fem`]: meshes, Hermite and quadratic-spline spaces, banded assembly and solves.
//! - [`schemes`]: stochastic and modified deterministic Crank-Nicolson schemes.
//! - [`experiments`]: exact/MC strong errors, deterministic rate studies, regression.
//! - [`cli`]: batch study runner writing CSV and summaries.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod fem;
pub mod noise;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
