//! C¹ finite elements for the hinged biharmonic operator on `(0,1)`.
//!
//! `S_h^p` is realized by cubic Hermite elements (`p = 3`) or C¹ quadratic
//! B-splines (`p = 2`); only `v = 0` is imposed at the endpoints, `v'' = 0`
//! being natural for `B(v, χ) = (v'', χ'')`.

mod banded;
pub mod quadrature;
mod space;

use std::f64::consts::{PI, SQRT_2};

pub use banded::{BandedCholesky, BandedSymMatrix};
pub use space::{Degree, FemSpace, LocalPoly, LocalShape, Mesh};

use crate::error::Result;
use crate::spectral::{eigenvalue, SpectralField};
use quadrature::{trig_moments, GaussRule};

/// Coefficients against the global basis of a [`FemSpace`].
#[derive(Debug, Clone, PartialEq)]
pub struct FemVector(pub Vec<f64>);

impl FemVector {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for FemVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn assemble(space: &FemSpace, local: impl Fn(&LocalPoly, &LocalPoly, f64) -> f64) -> BandedSymMatrix {
    let mut mat = BandedSymMatrix::zeros(space.dim(), space.bandwidth());
    for e in 0..space.mesh().elements() {
        let h = space.mesh().element_len(e);
        let shapes = space.element_shapes(e);
        for (a, sa) in shapes.iter().enumerate() {
            for sb in &shapes[..=a] {
                mat.add(sa.dof, sb.dof, local(&sa.poly, &sb.poly, h));
            }
        }
    }
    mat
}

/// Mass matrix `M_jk = ∫ φ_j φ_k`.
pub fn assemble_mass(space: &FemSpace) -> BandedSymMatrix {
    assemble(space, |p, q, h| h * p.inner(q))
}

/// Stiffness matrix `B_jk = ∫ φ_j'' φ_k''`.
pub fn assemble_biharmonic(space: &FemSpace) -> BandedSymMatrix {
    assemble(space, |p, q, h| {
        let p2 = p.derivative().derivative();
        let q2 = q.derivative().derivative();
        p2.inner(&q2) / (h * h * h)
    })
}

/// Load vector `(ε_k, φ_j)` computed from exact trigonometric moments.
pub fn sine_load(space: &FemSpace, k: usize) -> FemVector {
    let mut out = vec![0.0; space.dim()];
    let omega = k as f64 * PI;
    for e in 0..space.mesh().elements() {
        let (a, b) = space.mesh().element(e);
        let h = b - a;
        let (c, s) = trig_moments(omega * h);
        let (sa, ca) = (omega * a).sin_cos();
        for shape in space.element_shapes(e) {
            let v: f64 = (0..4)
                .map(|j| shape.poly.0[j] * (sa * c[j] + ca * s[j]))
                .sum();
            out[shape.dof] += SQRT_2 * h * v;
        }
    }
    FemVector(out)
}

/// Load vector `(g, φ_j)` for a spectral field.
pub fn spectral_load(space: &FemSpace, g: &SpectralField) -> FemVector {
    let mut out = vec![0.0; space.dim()];
    for (k, a) in g.iter_modes() {
        if a != 0.0 {
            for (o, v) in out.iter_mut().zip(sine_load(space, k).0) {
                *o += a * v;
            }
        }
    }
    FemVector(out)
}

/// Load vector `(f, φ_j)` for a pointwise function, by Gauss quadrature with
/// `subdivisions` pieces per element.
pub fn function_load(space: &FemSpace, f: impl Fn(f64) -> f64, subdivisions: usize) -> FemVector {
    let rule = GaussRule::new(8);
    let mut out = vec![0.0; space.dim()];
    for e in 0..space.mesh().elements() {
        let (a, b) = space.mesh().element(e);
        let h = b - a;
        for shape in space.element_shapes(e) {
            out[shape.dof] += rule.integrate(a, b, subdivisions, |x| {
                f(x) * shape.poly.eval((x - a) / h)
            });
        }
    }
    FemVector(out)
}

/// Assembled mass and stiffness matrices of one space together with their
/// factorizations.
#[derive(Debug, Clone)]
pub struct FemSystem {
    space: FemSpace,
    mass: BandedSymMatrix,
    stiffness: BandedSymMatrix,
    mass_chol: BandedCholesky,
    stiffness_chol: BandedCholesky,
}

impl FemSystem {
    pub fn new(space: FemSpace) -> Result<Self> {
        let mass = assemble_mass(&space);
        let stiffness = assemble_biharmonic(&space);
        let mass_chol = mass.cholesky()?;
        let stiffness_chol = stiffness.cholesky()?;
        Ok(Self {
            space,
            mass,
            stiffness,
            mass_chol,
            stiffness_chol,
        })
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn mass(&self) -> &BandedSymMatrix {
        &self.mass
    }

    pub fn stiffness(&self) -> &BandedSymMatrix {
        &self.stiffness
    }

    /// `P_h g`: solves `M c = (g, φ)`.
    pub fn l2_project(&self, g: &SpectralField) -> FemVector {
        FemVector(self.mass_chol.solve(&spectral_load(&self.space, g).0))
    }

    /// `P_h f` for a pointwise function.
    pub fn l2_project_fn(&self, f: impl Fn(f64) -> f64, subdivisions: usize) -> FemVector {
        FemVector(self.mass_chol.solve(&function_load(&self.space, f, subdivisions).0))
    }

    /// `T_{B,h} f = B_h^{-1} P_h f`: solves `B c = (f, φ)`.
    pub fn solve_tbh(&self, f: &SpectralField) -> FemVector {
        FemVector(self.stiffness_chol.solve(&spectral_load(&self.space, f).0))
    }

    /// `‖v‖²_{0,D}`.
    pub fn l2_norm_sq(&self, v: &[f64]) -> f64 {
        self.mass.quad_form(v)
    }

    /// `‖∂²ₓ v‖²_{0,D}`.
    pub fn h2_seminorm_sq(&self, v: &[f64]) -> f64 {
        self.stiffness.quad_form(v)
    }
}

/// Convenience wrapper: `P_h g` on a fresh system.
pub fn l2_project(space: &FemSpace, g: &SpectralField) -> Result<FemVector> {
    Ok(FemSystem::new(space.clone())?.l2_project(g))
}

/// Convenience wrapper: `T_{B,h} f` on a fresh system.
pub fn solve_tbh(space: &FemSpace, f: &SpectralField) -> Result<FemVector> {
    Ok(FemSystem::new(space.clone())?.solve_tbh(f))
}

const ERROR_RULE_POINTS: usize = 10;

/// Pieces per element so each piece spans at most half a period of the
/// highest sine mode.
fn error_subdivisions(h: f64, modes: usize) -> usize {
    ((modes as f64 * h).ceil() as usize).max(1)
}

/// `‖v - g‖_{0,D}` by composite Gauss quadrature of the pointwise difference.
pub fn fem_vs_spectral_error(space: &FemSpace, v: &[f64], g: &SpectralField) -> f64 {
    let rule = GaussRule::new(ERROR_RULE_POINTS);
    let mut acc = 0.0;
    for e in 0..space.mesh().elements() {
        let (a, b) = space.mesh().element(e);
        let sub = error_subdivisions(b - a, g.modes());
        acc += rule.integrate(a, b, sub, |x| {
            let d = space.eval_on_element(v, e, x)[0] - g.eval(x);
            d * d
        });
    }
    acc.sqrt()
}

/// `‖∂²ₓ(v - g)‖_{0,D}` by composite Gauss quadrature.
pub fn fem_vs_spectral_h2_error(space: &FemSpace, v: &[f64], g: &SpectralField) -> f64 {
    let g2 = g.map_modes(|k, a| {
        let l = eigenvalue(k);
        -l * l * a
    });
    let rule = GaussRule::new(ERROR_RULE_POINTS);
    let mut acc = 0.0;
    for e in 0..space.mesh().elements() {
        let (a, b) = space.mesh().element(e);
        let sub = error_subdivisions(b - a, g.modes());
        acc += rule.integrate(a, b, sub, |x| {
            let d = space.eval_on_element(v, e, x)[2] - g2.eval(x);
            d * d
        });
    }
    acc.sqrt()
}
