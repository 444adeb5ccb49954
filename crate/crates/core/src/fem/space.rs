//! Meshes of `[0,1]` and C¹ piecewise-polynomial spaces vanishing at both
//! endpoints.
//!
//! Every basis function is stored per element as a cubic polynomial in the
//! local coordinate `ξ = (x - x_a)/h_e ∈ [0,1]`, which makes mass, stiffness,
//! and sine-load integrals closed-form.

use crate::error::{invalid, Result};

/// Strictly increasing nodes `0 = x_0 < … < x_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<f64>,
}

impl Mesh {
    pub fn new(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(invalid("mesh needs at least one element"));
        }
        if nodes[0] != 0.0 || *nodes.last().unwrap() != 1.0 {
            return Err(invalid("mesh must start at 0 and end at 1"));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("mesh nodes must be strictly increasing"));
        }
        Ok(Self { nodes })
    }

    pub fn uniform(elements: usize) -> Result<Self> {
        if elements == 0 {
            return Err(invalid("mesh needs at least one element"));
        }
        let n = elements as f64;
        let mut nodes: Vec<f64> = (0..=elements).map(|j| j as f64 / n).collect();
        nodes[elements] = 1.0;
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Endpoints of element `e` (0-based).
    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    pub fn element_len(&self, e: usize) -> f64 {
        self.nodes[e + 1] - self.nodes[e]
    }

    /// Maximum element length.
    pub fn h(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Element containing `x` (the left one at interior nodes).
    pub fn locate(&self, x: f64) -> usize {
        let n = self.elements();
        match self.nodes.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(j) => j.saturating_sub(1).min(n - 1),
            Err(j) => j.saturating_sub(1).min(n - 1),
        }
    }
}

/// Polynomial `Σ_j c_j ξ^j` of degree ≤ 3 in the local coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalPoly(pub [f64; 4]);

impl LocalPoly {
    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        let c = &self.0;
        ((c[3] * xi + c[2]) * xi + c[1]) * xi + c[0]
    }

    pub fn derivative(&self) -> Self {
        let c = &self.0;
        LocalPoly([c[1], 2.0 * c[2], 3.0 * c[3], 0.0])
    }

    /// `∫_0^1 p q dξ`.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut s = 0.0;
        for (j, a) in self.0.iter().enumerate() {
            for (k, b) in other.0.iter().enumerate() {
                s += a * b / (j + k + 1) as f64;
            }
        }
        s
    }
}

/// A basis function restricted to one element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalShape {
    pub dof: usize,
    pub poly: LocalPoly,
}

/// Polynomial degree of the C¹ space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Degree {
    /// C¹ quadratic B-splines.
    Quadratic,
    /// C¹ cubic Hermite elements.
    Cubic,
}

impl Degree {
    pub fn from_order(p: usize) -> Result<Self> {
        match p {
            2 => Ok(Degree::Quadratic),
            3 => Ok(Degree::Cubic),
            _ => Err(invalid(format!("polynomial degree must be 2 or 3 (got {p})"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Degree::Quadratic => 2,
            Degree::Cubic => 3,
        }
    }
}

/// `S_h^p ⊂ H²(D) ∩ H¹₀(D)` on a mesh.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Mesh,
    degree: Degree,
    dim: usize,
    bandwidth: usize,
    shapes: Vec<Vec<LocalShape>>,
}

impl FemSpace {
    /// Builds the space. Hermite cubics use a value and a slope DOF per node
    /// (values dropped at 0 and 1, slopes pre-scaled by the mean adjacent
    /// element length). Quadratics use the open-knot C¹ B-spline basis with the
    /// two endpoint splines removed.
    pub fn new(mesh: Mesh, degree: Degree) -> Result<Self> {
        let shapes = match degree {
            Degree::Cubic => hermite_shapes(&mesh),
            Degree::Quadratic => {
                if mesh.elements() < 2 {
                    return Err(invalid("quadratic splines need at least 2 elements"));
                }
                spline_shapes(&mesh)
            }
        };
        let dim = shapes
            .iter()
            .flatten()
            .map(|s| s.dof + 1)
            .max()
            .unwrap_or(0);
        let bandwidth = shapes
            .iter()
            .map(|el| {
                let lo = el.iter().map(|s| s.dof).min().unwrap_or(0);
                let hi = el.iter().map(|s| s.dof).max().unwrap_or(0);
                hi - lo
            })
            .max()
            .unwrap_or(0);
        Ok(Self {
            mesh,
            degree,
            dim,
            bandwidth,
            shapes,
        })
    }

    pub fn uniform(elements: usize, p: usize) -> Result<Self> {
        Self::new(Mesh::uniform(elements)?, Degree::from_order(p)?)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn degree(&self) -> Degree {
        self.degree
    }

    /// `ν_h`, the number of global basis functions.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    /// Local shapes active on element `e`.
    pub fn element_shapes(&self, e: usize) -> &[LocalShape] {
        &self.shapes[e]
    }

    /// `(v, v', v'')` at `x` for coefficient vector `coeffs`.
    pub fn eval_derivs(&self, coeffs: &[f64], x: f64) -> [f64; 3] {
        let e = self.mesh.locate(x);
        self.eval_on_element(coeffs, e, x)
    }

    /// Same as [`Self::eval_derivs`] using the polynomials of element `e`
    /// (one-sided limits at element boundaries).
    pub fn eval_on_element(&self, coeffs: &[f64], e: usize, x: f64) -> [f64; 3] {
        let (a, b) = self.mesh.element(e);
        let h = b - a;
        let xi = (x - a) / h;
        let mut out = [0.0; 3];
        for s in &self.shapes[e] {
            let c = coeffs[s.dof];
            let d1 = s.poly.derivative();
            let d2 = d1.derivative();
            out[0] += c * s.poly.eval(xi);
            out[1] += c * d1.eval(xi) / h;
            out[2] += c * d2.eval(xi) / (h * h);
        }
        out
    }

    pub fn eval(&self, coeffs: &[f64], x: f64) -> f64 {
        self.eval_derivs(coeffs, x)[0]
    }

    /// Coefficient vector of the `j`-th basis function.
    pub fn unit_vector(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[j] = 1.0;
        v
    }
}

fn hermite_shapes(mesh: &Mesh) -> Vec<Vec<LocalShape>> {
    let n = mesh.elements();
    // node j: value dof (interior only) then slope dof
    let value_dof = |j: usize| -> Option<usize> { (j > 0 && j < n).then(|| 2 * j - 1) };
    let slope_dof = |j: usize| -> usize { (2 * j).min(2 * n - 1) };
    let slope_scale = |j: usize| -> f64 {
        if j == 0 {
            mesh.element_len(0)
        } else if j == n {
            mesh.element_len(n - 1)
        } else {
            0.5 * (mesh.element_len(j - 1) + mesh.element_len(j))
        }
    };
    (0..n)
        .map(|e| {
            let h = mesh.element_len(e);
            let mut el = Vec::with_capacity(4);
            if let Some(d) = value_dof(e) {
                el.push(LocalShape {
                    dof: d,
                    poly: LocalPoly([1.0, 0.0, -3.0, 2.0]),
                });
            }
            let r = h / slope_scale(e);
            el.push(LocalShape {
                dof: slope_dof(e),
                poly: LocalPoly([0.0, r, -2.0 * r, r]),
            });
            if let Some(d) = value_dof(e + 1) {
                el.push(LocalShape {
                    dof: d,
                    poly: LocalPoly([0.0, 0.0, 3.0, -2.0]),
                });
            }
            let r = h / slope_scale(e + 1);
            el.push(LocalShape {
                dof: slope_dof(e + 1),
                poly: LocalPoly([0.0, 0.0, -r, r]),
            });
            el
        })
        .collect()
}

/// Cox-de Boor evaluation of the `j`-th degree-`p` B-spline.
fn bspline(knots: &[f64], j: usize, p: usize, x: f64) -> f64 {
    if p == 0 {
        return if knots[j] <= x && x < knots[j + 1] { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let d1 = knots[j + p] - knots[j];
    if d1 > 0.0 {
        v += (x - knots[j]) / d1 * bspline(knots, j, p - 1, x);
    }
    let d2 = knots[j + p + 1] - knots[j + 1];
    if d2 > 0.0 {
        v += (knots[j + p + 1] - x) / d2 * bspline(knots, j + 1, p - 1, x);
    }
    v
}

fn spline_shapes(mesh: &Mesh) -> Vec<Vec<LocalShape>> {
    let n = mesh.elements();
    let nodes = mesh.nodes();
    let mut knots = vec![0.0, 0.0];
    knots.extend_from_slice(nodes);
    knots.extend_from_slice(&[1.0, 1.0]);
    // splines 0..=n+1; the first and last are the only ones nonzero at 0 and 1
    const SAMPLES: [f64; 3] = [0.25, 0.5, 0.75];
    (0..n)
        .map(|e| {
            let (a, b) = mesh.element(e);
            (e..=e + 2)
                .filter(|&j| j >= 1 && j <= n)
                .map(|j| {
                    let y: Vec<f64> = SAMPLES
                        .iter()
                        .map(|&xi| bspline(&knots, j, 2, a + xi * (b - a)))
                        .collect();
                    LocalShape {
                        dof: j - 1,
                        poly: quadratic_through(&SAMPLES, &y),
                    }
                })
                .collect()
        })
        .collect()
}

/// Monomial coefficients of the quadratic through three points.
fn quadratic_through(xs: &[f64; 3], ys: &[f64]) -> LocalPoly {
    let mut c = [0.0; 4];
    for i in 0..3 {
        let (p, q) = match i {
            0 => (xs[1], xs[2]),
            1 => (xs[0], xs[2]),
            _ => (xs[0], xs[1]),
        };
        let denom = (xs[i] - p) * (xs[i] - q);
        let w = ys[i] / denom;
        // (ξ - p)(ξ - q) = ξ² - (p+q)ξ + pq
        c[0] += w * p * q;
        c[1] -= w * (p + q);
        c[2] += w;
    }
    LocalPoly(c)
}
