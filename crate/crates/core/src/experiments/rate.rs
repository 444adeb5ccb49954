//! Error curves and log-log rate fits.

use std::fmt;

use crate::error::{invalid, Error, Result};

/// Refinement parameter of an [`ErrorCurve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParameterKind {
    /// Scheme time step `Δτ`.
    TimeStep,
    /// Mesh size `h`.
    MeshSize,
    /// Inverse mode count `1/M⋆`.
    InverseModes,
    /// Noise time step `Δt`.
    NoiseStep,
}

impl ParameterKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::TimeStep => "dtau",
            Self::MeshSize => "h",
            Self::InverseModes => "inv_modes",
            Self::NoiseStep => "dt",
        }
    }
}

impl fmt::Display for ParameterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// `(parameter, error)` pairs with strictly decreasing parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCurve {
    kind: ParameterKind,
    points: Vec<(f64, f64)>,
}

impl ErrorCurve {
    pub fn new(kind: ParameterKind, points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return Err(invalid(format!(
                "an error curve needs at least 3 points (got {})",
                points.len()
            )));
        }
        if points.iter().any(|&(p, e)| !(p > 0.0) || !p.is_finite() || !e.is_finite()) {
            return Err(invalid("curve parameters must be positive and errors finite"));
        }
        if points.windows(2).any(|w| w[1].0 >= w[0].0) {
            return Err(invalid("curve parameters must be strictly decreasing"));
        }
        Ok(Self { kind, points })
    }

    pub fn kind(&self) -> ParameterKind {
        self.kind
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Same curve with each error replaced by its square root.
    pub fn sqrt_errors(&self) -> Self {
        Self {
            kind: self.kind,
            points: self.points.iter().map(|&(p, e)| (p, e.max(0.0).sqrt())).collect(),
        }
    }
}

/// Least-squares fit `log e = intercept + slope · log x`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub curve: ErrorCurve,
}

impl RateReport {
    /// `lo ≤ slope ≤ hi` and `R² ≥ min_r2`.
    pub fn within(&self, lo: f64, hi: f64, min_r2: f64) -> bool {
        self.slope >= lo && self.slope <= hi && self.r_squared >= min_r2
    }
}

pub fn rate_regression(curve: &ErrorCurve) -> Result<RateReport> {
    if let Some(&(p, e)) = curve.points.iter().find(|&&(_, e)| !(e > 0.0)) {
        return Err(Error::DegenerateCurve(format!(
            "non-positive error {e} at {} = {p}",
            curve.kind
        )));
    }
    let n = curve.points.len() as f64;
    let xs: Vec<f64> = curve.points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = curve.points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        let sse: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    Ok(RateReport {
        slope,
        intercept,
        r_squared,
        curve: curve.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dyadic(levels: usize) -> Vec<f64> {
        (0..levels).map(|k| 0.5f64.powi(k as i32 + 2)).collect()
    }

    #[test]
    fn exact_power_law() {
        for q in [0.375, 1.0, 1.5, 4.0] {
            let pts = dyadic(5).into_iter().map(|x| (x, 3.0 * x.powf(q))).collect();
            let r = rate_regression(&ErrorCurve::new(ParameterKind::MeshSize, pts).unwrap()).unwrap();
            assert!((r.slope - q).abs() < 1e-10);
            assert!((r.intercept - 3f64.ln()).abs() < 1e-9);
            assert!((r.r_squared - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_preconditions() {
        assert!(ErrorCurve::new(ParameterKind::TimeStep, vec![(0.5, 1.0), (0.25, 0.5)]).is_err());
        assert!(ErrorCurve::new(
            ParameterKind::TimeStep,
            vec![(0.25, 1.0), (0.5, 0.5), (0.125, 0.1)]
        )
        .is_err());
        let zero = ErrorCurve::new(
            ParameterKind::TimeStep,
            vec![(0.5, 1.0), (0.25, 0.0), (0.125, 0.1)],
        )
        .unwrap();
        assert!(matches!(rate_regression(&zero), Err(Error::DegenerateCurve(_))));
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let pts = dyadic(6)
                .into_iter()
                .map(|x| (x, 2.0 * x.powf(1.5) * (1.0 + rng.random_range(-0.1..0.1))))
                .collect();
            let r = rate_regression(&ErrorCurve::new(ParameterKind::MeshSize, pts).unwrap()).unwrap();
            assert!((r.slope - 1.5).abs() <= 0.15, "{}", r.slope);
        }
    }

    #[test]
    fn sqrt_halves_slope() {
        let pts = dyadic(4).into_iter().map(|x| (x, x.powi(3))).collect();
        let c = ErrorCurve::new(ParameterKind::NoiseStep, pts).unwrap();
        let r = rate_regression(&c.sqrt_errors()).unwrap();
        assert!((r.slope - 1.5).abs() < 1e-10);
    }
}
