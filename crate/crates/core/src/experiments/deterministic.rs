//! Convergence studies for the modified Crank-Nicolson scheme applied to the
//! deterministic problem `w_t + ∂⁴ₓ w = 0`, `w(0) = w₀`.

use crate::error::{invalid, Result};
use crate::fem::{fem_vs_spectral_error, FemSpace, FemSystem, FemVector};
use crate::schemes::{cn_fem_deterministic, cn_spectral_deterministic, SchemeConfig};
use crate::spectral::SpectralField;

use super::rate::{rate_regression, ErrorCurve, ParameterKind, RateReport};

/// Discrete `L²_t(L²_x)` error measured by a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterministicProp {
    /// `Δτ Σ_{m≥1} ‖W^{m-½} - w^{m-½}‖²`: time-discrete vs exact, averaged.
    TimeAveraged,
    /// `Δτ Σ_{m≥1} ‖W^m - w^m‖²`: time-discrete vs exact, nodal.
    TimeNodal,
    /// `Δτ ‖W¹ - W_h¹‖² + Δτ Σ_{m≥2} ‖W^{m-½} - W_h^{m-½}‖²`: fully vs time-discrete.
    FemAveraged,
    /// `Δτ Σ_{m≥1} ‖W^m - W_h^m‖²`: fully vs time-discrete, nodal.
    FemNodal,
}

impl DeterministicProp {
    pub fn is_spatial(self) -> bool {
        matches!(self, Self::FemAveraged | Self::FemNodal)
    }
}

/// Grid levels of a study: step counts for the time studies, element counts
/// (at a fixed step count) for the spatial ones.
#[derive(Debug, Clone, PartialEq)]
pub enum Refinement {
    Time { steps: Vec<usize> },
    Space { elements: Vec<usize>, degree: usize, steps: usize },
}

fn midpoint(a: &SpectralField, b: &SpectralField) -> SpectralField {
    a.add(b).scale(0.5)
}

fn fem_midpoint(a: &FemVector, b: &FemVector) -> Vec<f64> {
    a.0.iter().zip(&b.0).map(|(x, y)| 0.5 * (x + y)).collect()
}

/// Squared time error of [`DeterministicProp::TimeAveraged`] or
/// [`DeterministicProp::TimeNodal`] on `M` steps over `[0, T]`.
pub fn time_error_sq(prop: DeterministicProp, w0: &SpectralField, cfg: &SchemeConfig) -> Result<f64> {
    if prop.is_spatial() {
        return Err(invalid("space error requested from the time evaluator"));
    }
    let dtau = cfg.dtau();
    let w = cn_spectral_deterministic(w0, cfg);
    let exact = (0..=cfg.steps)
        .map(|m| w0.semigroup_apply(m as f64 * dtau))
        .collect::<Result<Vec<_>>>()?;
    let acc: f64 = (1..=cfg.steps)
        .map(|m| match prop {
            DeterministicProp::TimeAveraged => midpoint(&w[m], &w[m - 1])
                .sub(&midpoint(&exact[m], &exact[m - 1]))
                .l2_norm()
                .powi(2),
            _ => w[m].sub(&exact[m]).l2_norm().powi(2),
        })
        .sum();
    Ok(dtau * acc)
}

/// Squared space error of [`DeterministicProp::FemAveraged`] or
/// [`DeterministicProp::FemNodal`]; the reference is the time-discrete
/// spectral solution on the same steps.
pub fn space_error_sq(
    prop: DeterministicProp,
    w0: &SpectralField,
    space: &FemSpace,
    cfg: &SchemeConfig,
) -> Result<f64> {
    if !prop.is_spatial() {
        return Err(invalid("time error requested from the space evaluator"));
    }
    let system = FemSystem::new(space.clone())?;
    let w = cn_spectral_deterministic(w0, cfg);
    let wh = cn_fem_deterministic(&system, w0, cfg)?;
    let err = |v: &[f64], g: &SpectralField| fem_vs_spectral_error(space, v, g).powi(2);
    let acc: f64 = match prop {
        DeterministicProp::FemAveraged => {
            err(&wh[1].0, &w[1])
                + (2..=cfg.steps)
                    .map(|m| err(&fem_midpoint(&wh[m], &wh[m - 1]), &midpoint(&w[m], &w[m - 1])))
                    .sum::<f64>()
        }
        _ => (1..=cfg.steps).map(|m| err(&wh[m].0, &w[m])).sum(),
    };
    Ok(cfg.dtau() * acc)
}

/// Error curve of a study: `(Δτ or h, squared error)` per level.
pub fn deterministic_curve(
    prop: DeterministicProp,
    w0: &SpectralField,
    horizon: f64,
    grid: &Refinement,
) -> Result<ErrorCurve> {
    match (prop.is_spatial(), grid) {
        (false, Refinement::Time { steps }) => {
            let points = steps
                .iter()
                .map(|&m| {
                    let cfg = SchemeConfig::new(horizon, m)?;
                    Ok((cfg.dtau(), time_error_sq(prop, w0, &cfg)?))
                })
                .collect::<Result<Vec<_>>>()?;
            ErrorCurve::new(ParameterKind::TimeStep, points)
        }
        (true, Refinement::Space { elements, degree, steps }) => {
            let cfg = SchemeConfig::new(horizon, *steps)?;
            let points = elements
                .iter()
                .map(|&n| {
                    let space = FemSpace::uniform(n, *degree)?;
                    Ok((space.h(), space_error_sq(prop, w0, &space, &cfg)?))
                })
                .collect::<Result<Vec<_>>>()?;
            ErrorCurve::new(ParameterKind::MeshSize, points)
        }
        _ => Err(invalid(format!("grid does not match study {prop:?}"))),
    }
}

/// Rate of the root error `(Δτ Σ ‖·‖²)^{1/2}` over the grid levels.
pub fn deterministic_rate_study(
    prop: DeterministicProp,
    w0: &SpectralField,
    horizon: f64,
    grid: &Refinement,
) -> Result<RateReport> {
    let curve = deterministic_curve(prop, w0, horizon, grid)?;
    rate_regression(&curve.sqrt_errors())
}
