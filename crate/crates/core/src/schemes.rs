//! Crank-Nicolson time stepping.
//!
//! Stochastic schemes start from zero and use the plain Crank-Nicolson step
//! throughout; the deterministic schemes replace the first step with the
//! damped half step `W¹ - W⁰ + (Δτ/2) ∂⁴ₓ W¹ = 0`.
//!
//! The noise grid `(N, Δt)` and the scheme grid `(M, Δτ)` are independent; the
//! load of step `m` is `Σ_n |Δ_m ∩ T_n| R^n_i / Δt`.

use crate::error::{invalid, Result};
use crate::fem::{sine_load, BandedCholesky, BandedSymMatrix, FemSystem, FemVector};
use crate::noise::NoisePath;
use crate::spectral::{biharmonic_eigenvalue, SpectralField};

/// Time grid of a scheme run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub horizon: f64,
    pub steps: usize,
    /// Use the damped first step (deterministic schemes only).
    pub modified_first_step: bool,
}

impl SchemeConfig {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("scheme needs at least one step"));
        }
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(invalid(format!("horizon must be positive (got {horizon})")));
        }
        Ok(Self {
            horizon,
            steps,
            modified_first_step: true,
        })
    }

    pub fn with_modified_first_step(mut self, on: bool) -> Self {
        self.modified_first_step = on;
        self
    }

    /// `Δτ = T/M`.
    pub fn dtau(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// Per-mode Crank-Nicolson factors for `x = Δτ λ⁴`:
/// `r = (1 - x/2)/(1 + x/2)` and `s = 1/(1 + x/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CnFactors {
    pub amplification: f64,
    pub gain: f64,
}

impl CnFactors {
    pub fn new(k: usize, dtau: f64) -> Self {
        let half = 0.5 * dtau * biharmonic_eigenvalue(k);
        Self {
            amplification: (1.0 - half) / (1.0 + half),
            gain: 1.0 / (1.0 + half),
        }
    }
}

/// Overlap weights `|Δ_m ∩ T_n| / Δt` between the scheme and noise grids.
///
/// Both grids partition the same horizon, so the overlap is computed in units
/// of `T/(M·N)` with integer arithmetic and is exact for nested grids.
#[derive(Debug, Clone)]
pub struct StepOverlaps {
    steps: Vec<Vec<(usize, f64)>>,
}

impl StepOverlaps {
    pub fn new(steps: usize, intervals: usize) -> Self {
        let (mm, nn) = (steps as u128, intervals as u128);
        let mut out = Vec::with_capacity(steps);
        let mut first = 1u128;
        for m in 1..=mm {
            let (lo, hi) = ((m - 1) * nn, m * nn);
            let mut list = Vec::new();
            let mut n = first;
            while n <= nn {
                let (a, b) = ((n - 1) * mm, n * mm);
                if a >= hi {
                    break;
                }
                let overlap = hi.min(b).saturating_sub(lo.max(a));
                if overlap > 0 {
                    list.push((n as usize, overlap as f64 / mm as f64));
                }
                if b <= hi {
                    first = n + 1;
                }
                n += 1;
            }
            out.push(list);
        }
        Self { steps: out }
    }

    /// `(n, |Δ_m ∩ T_n|/Δt)` pairs for step `m` (1-based).
    pub fn step(&self, m: usize) -> &[(usize, f64)] {
        &self.steps[m - 1]
    }

    pub fn steps(&self) -> usize {
        self.steps.len()
    }

    /// `L_i^m` for one mode row of increments.
    #[inline]
    pub fn load(&self, m: usize, row: &[f64]) -> f64 {
        self.step(m).iter().map(|&(n, w)| w * row[n - 1]).sum()
    }
}

fn check_horizon(path: &NoisePath, cfg: &SchemeConfig) -> Result<()> {
    let (a, b) = (path.horizon(), cfg.horizon);
    if (a - b).abs() > 1e-12 * b.abs() {
        return Err(invalid(format!(
            "noise horizon {a} does not match scheme horizon {b}"
        )));
    }
    Ok(())
}

/// Time-discrete stochastic Crank-Nicolson `U⁰ … U^M` on the modes of `path`.
pub fn cn_spectral_stochastic(path: &NoisePath, cfg: &SchemeConfig) -> Result<Vec<SpectralField>> {
    check_horizon(path, cfg)?;
    let overlaps = StepOverlaps::new(cfg.steps, path.intervals());
    let modes = path.modes();
    let mut states = vec![vec![0.0; modes]; cfg.steps + 1];
    for i in 1..=modes {
        let f = CnFactors::new(i, cfg.dtau());
        let row = path.row(i);
        let mut u = 0.0;
        for m in 1..=cfg.steps {
            u = f.amplification * u + f.gain * overlaps.load(m, row);
            states[m][i - 1] = u;
        }
    }
    Ok(states
        .into_iter()
        .map(SpectralField::from_vec_unchecked)
        .collect())
}

/// Modified Crank-Nicolson for the deterministic problem, `W⁰ = w₀`.
pub fn cn_spectral_deterministic(w0: &SpectralField, cfg: &SchemeConfig) -> Vec<SpectralField> {
    let dtau = cfg.dtau();
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(w0.clone());
    let first = w0.map_modes(|k, a| {
        let f = CnFactors::new(k, dtau);
        if cfg.modified_first_step {
            f.gain * a
        } else {
            f.amplification * a
        }
    });
    out.push(first);
    for m in 2..=cfg.steps {
        let next = out[m - 1].map_modes(|k, a| CnFactors::new(k, dtau).amplification * a);
        out.push(next);
    }
    out
}

/// `M + (Δτ/2)B` factored once, plus `M - (Δτ/2)B`, for repeated
/// Crank-Nicolson steps on one space.
#[derive(Debug, Clone)]
pub struct CnFemOperator<'a> {
    system: &'a FemSystem,
    dtau: f64,
    implicit: BandedCholesky,
    explicit: BandedSymMatrix,
}

impl<'a> CnFemOperator<'a> {
    pub fn new(system: &'a FemSystem, dtau: f64) -> Result<Self> {
        let implicit = system
            .mass()
            .lin_comb(1.0, system.stiffness(), 0.5 * dtau)
            .cholesky()?;
        let explicit = system.mass().lin_comb(1.0, system.stiffness(), -0.5 * dtau);
        Ok(Self {
            system,
            dtau,
            implicit,
            explicit,
        })
    }

    pub fn system(&self) -> &FemSystem {
        self.system
    }

    pub fn dtau(&self) -> f64 {
        self.dtau
    }

    /// Solves `(M + Δτ/2 B) u = (M - Δτ/2 B) prev + load`.
    pub fn step(&self, prev: &[f64], load: Option<&[f64]>) -> Vec<f64> {
        let mut rhs = self.explicit.matvec(prev);
        if let Some(b) = load {
            rhs.iter_mut().zip(b).for_each(|(r, v)| *r += v);
        }
        self.implicit.solve_in_place(&mut rhs);
        rhs
    }

    /// Damped first step: `(M + Δτ/2 B) u = M prev`.
    pub fn damped_step(&self, prev: &[f64]) -> Vec<f64> {
        let mut rhs = self.system.mass().matvec(prev);
        self.implicit.solve_in_place(&mut rhs);
        rhs
    }

    /// One pass of iterative refinement for `u` solving
    /// `(M + Δτ/2 B) u = (M - Δτ/2 B) prev + load`, or `M prev` when
    /// `damped`. The residual is accumulated in double-double arithmetic
    /// from `M` and `B` directly.
    pub fn refine(&self, prev: &[f64], load: Option<&[f64]>, damped: bool, u: &mut [f64]) {
        let (mass, stiff) = (self.system.mass(), self.system.stiffness());
        let half = 0.5 * self.dtau;
        let prev_b = if damped { 0.0 } else { -half };
        let bw = mass.bandwidth();
        let dim = u.len();
        let mut r: Vec<f64> = (0..dim)
            .map(|i| {
                let mut acc = Compensated::default();
                if let Some(b) = load {
                    acc.add(b[i]);
                }
                for j in i.saturating_sub(bw)..(i + bw + 1).min(dim) {
                    let (mij, bij) = (mass.get(i, j), stiff.get(i, j));
                    acc.add_prod(mij, prev[j]);
                    acc.add_prod(-mij, u[j]);
                    acc.add_scaled_prod(prev_b, bij, prev[j]);
                    acc.add_scaled_prod(-half, bij, u[j]);
                }
                acc.value()
            })
            .collect();
        self.implicit.solve_in_place(&mut r);
        u.iter_mut().zip(&r).for_each(|(a, d)| *a += d);
    }

    /// `(M + Δτ/2 B)^{-1} b`.
    pub fn solve_implicit(&self, b: &[f64]) -> Vec<f64> {
        self.implicit.solve(b)
    }
}

/// Double-double sum with exact products.
#[derive(Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bb = s - self.hi;
        self.lo += (self.hi - (s - bb)) + (x - bb);
        self.hi = s;
    }

    fn add_prod(&mut self, a: f64, b: f64) {
        let p = a * b;
        self.add(p);
        self.lo += a.mul_add(b, -p);
    }

    /// `c·a·b`, exact up to the second-order term.
    fn add_scaled_prod(&mut self, c: f64, a: f64, b: f64) {
        let p = a * b;
        let e = a.mul_add(b, -p);
        self.add_prod(c, p);
        self.lo += c * e;
    }

    fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

/// Sine loads `(ε_i, φ_j)` for `i = 1..=modes`.
pub fn sine_loads(system: &FemSystem, modes: usize) -> Vec<Vec<f64>> {
    (1..=modes)
        .map(|i| sine_load(system.space(), i).into_vec())
        .collect()
}

/// Fully discrete stochastic Crank-Nicolson `U_h⁰ … U_h^M`.
pub fn cn_fem_stochastic(
    system: &FemSystem,
    path: &NoisePath,
    cfg: &SchemeConfig,
) -> Result<Vec<FemVector>> {
    check_horizon(path, cfg)?;
    let op = CnFemOperator::new(system, cfg.dtau())?;
    let loads = sine_loads(system, path.modes());
    Ok(run_fem_stochastic(&op, &loads, path, cfg))
}

/// Stochastic run against a prepared operator and precomputed sine loads.
pub(crate) fn run_fem_stochastic(
    op: &CnFemOperator<'_>,
    loads: &[Vec<f64>],
    path: &NoisePath,
    cfg: &SchemeConfig,
) -> Vec<FemVector> {
    let dim = op.system().space().dim();
    let overlaps = StepOverlaps::new(cfg.steps, path.intervals());
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(FemVector::zeros(dim));
    let mut b = vec![0.0; dim];
    for m in 1..=cfg.steps {
        b.iter_mut().for_each(|v| *v = 0.0);
        for (i, load) in loads.iter().enumerate().take(path.modes()) {
            let l = overlaps.load(m, path.row(i + 1));
            if l != 0.0 {
                b.iter_mut().zip(load).for_each(|(acc, v)| *acc += l * v);
            }
        }
        let next = op.step(out[m - 1].as_slice(), Some(&b));
        out.push(FemVector(next));
    }
    out
}

/// Modified Crank-Nicolson finite element approximation of the deterministic
/// problem with `W_h⁰ = P_h w₀`.
pub fn cn_fem_deterministic(
    system: &FemSystem,
    w0: &SpectralField,
    cfg: &SchemeConfig,
) -> Result<Vec<FemVector>> {
    let op = CnFemOperator::new(system, cfg.dtau())?;
    let mut out = Vec::with_capacity(cfg.steps + 1);
    out.push(system.l2_project(w0));
    let mut first = if cfg.modified_first_step {
        op.damped_step(out[0].as_slice())
    } else {
        op.step(out[0].as_slice(), None)
    };
    op.refine(out[0].as_slice(), None, cfg.modified_first_step, &mut first);
    out.push(FemVector(first));
    for m in 2..=cfg.steps {
        let mut next = op.step(out[m - 1].as_slice(), None);
        op.refine(out[m - 1].as_slice(), None, false, &mut next);
        out.push(FemVector(next));
    }
    Ok(out)
}
