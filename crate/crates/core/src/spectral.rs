//! Sine eigenbasis computations on `D = (0,1)`.
//!
//! The hinged biharmonic operator `∂⁴ₓ` with `v = v'' = 0` on the boundary is
//! diagonal in the basis `ε_k(x) = √2 sin(kπx)`, `k ≥ 1`, with eigenvalues
//! `λ_k⁴` where `λ_k = kπ`. Everything here works on coefficient vectors in that
//! basis, so all operators are exact per-mode multipliers.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{invalid, Error, Result};
use crate::noise::NoisePath;

/// `λ_k = kπ`.
#[inline]
pub fn eigenvalue(k: usize) -> f64 {
    k as f64 * PI
}

/// `λ_k⁴`, the eigenvalue of the hinged biharmonic operator on mode `k`.
#[inline]
pub fn biharmonic_eigenvalue(k: usize) -> f64 {
    let l = eigenvalue(k);
    let l2 = l * l;
    l2 * l2
}

/// Evaluates `ε_k(x) = √2 sin(kπx)`.
pub fn eval_basis(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::ModeIndex(k));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("point {x} outside [0,1]")));
    }
    Ok(basis_unchecked(k, x))
}

#[inline]
pub(crate) fn basis_unchecked(k: usize, x: f64) -> f64 {
    SQRT_2 * (eigenvalue(k) * x).sin()
}

/// `(1 - e^{-x}) / x`, continuous at `x = 0`.
#[inline]
pub(crate) fn one_minus_exp_over(x: f64) -> f64 {
    if x.abs() < 1e-300 {
        1.0
    } else {
        -(-x).exp_m1() / x
    }
}

/// Order of the inverse elliptic operator applied by
/// [`SpectralField::apply_inverse_elliptic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EllipticOrder {
    /// `T_E`: solves `v'' = f` with `v = 0` on the boundary.
    Second,
    /// `T_B`: solves `v'''' = f` with `v = v'' = 0` on the boundary.
    Fourth,
}

/// A function on `D` represented by its first `K` sine coefficients
/// `a_k = (g, ε_k)`. `coeffs()[0]` is mode 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("spectral field needs at least one mode"));
        }
        if let Some(pos) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite coefficient at mode {}", pos + 1)));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(modes: usize) -> Self {
        Self {
            coeffs: vec![0.0; modes.max(1)],
        }
    }

    /// The field `ε_k` carried on `modes` coefficients.
    pub fn unit(k: usize, modes: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::ModeIndex(k));
        }
        if k > modes {
            return Err(Error::OutOfRange(format!("mode {k} exceeds {modes} modes")));
        }
        let mut coeffs = vec![0.0; modes];
        coeffs[k - 1] = 1.0;
        Ok(Self { coeffs })
    }

    pub(crate) fn from_vec_unchecked(coeffs: Vec<f64>) -> Self {
        debug_assert!(!coeffs.is_empty());
        Self { coeffs }
    }

    pub fn modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of mode `k` (1-based); zero beyond the stored modes.
    pub fn coeff(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.coeffs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    /// Iterates `(k, a_k)` with `k` starting at 1.
    pub fn iter_modes(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.coeffs.iter().enumerate().map(|(i, &a)| (i + 1, a))
    }

    /// Pointwise value `Σ a_k ε_k(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        self.iter_modes().map(|(k, a)| a * basis_unchecked(k, x)).sum()
    }

    /// `‖g‖_{Ḣ^s} = (Σ λ_k^{2s} a_k²)^{1/2}`.
    pub fn hdot_norm(&self, s: f64) -> f64 {
        self.iter_modes()
            .map(|(k, a)| eigenvalue(k).powf(2.0 * s) * a * a)
            .sum::<f64>()
            .sqrt()
    }

    /// L² norm (Parseval).
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Applies the solution semigroup `a_k ↦ e^{-λ_k⁴ t} a_k`.
    pub fn semigroup_apply(&self, t: f64) -> Result<Self> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::NegativeTime(t));
        }
        Ok(self.map_modes(|k, a| a * (-biharmonic_eigenvalue(k) * t).exp()))
    }

    /// Applies `T_E` (symbol `-λ_k^{-2}`) or `T_B` (symbol `λ_k^{-4}`).
    pub fn apply_inverse_elliptic(&self, order: EllipticOrder) -> Self {
        match order {
            EllipticOrder::Second => self.map_modes(|k, a| {
                let l = eigenvalue(k);
                -a / (l * l)
            }),
            EllipticOrder::Fourth => self.map_modes(|k, a| a / biharmonic_eigenvalue(k)),
        }
    }

    /// Multiplies each coefficient by `λ_k⁴` (the hinged `∂⁴ₓ`).
    pub fn apply_biharmonic(&self) -> Self {
        self.map_modes(|k, a| a * biharmonic_eigenvalue(k))
    }

    pub fn map_modes(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            coeffs: self.iter_modes().map(|(k, a)| f(k, a)).collect(),
        }
    }

    /// Sum of two fields; the result carries the larger mode count.
    pub fn add(&self, other: &Self) -> Self {
        let n = self.modes().max(other.modes());
        Self {
            coeffs: (1..=n).map(|k| self.coeff(k) + other.coeff(k)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let n = self.modes().max(other.modes());
        Self {
            coeffs: (1..=n).map(|k| self.coeff(k) - other.coeff(k)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| c * a).collect(),
        }
    }
}

/// Per-mode impulse weights of `û` at the final node: the response of
/// `û_i(t_N)` to `R^n_i` is `decay^{N-n} · gain`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct UhatKernel {
    pub decay: f64,
    pub gain: f64,
}

impl UhatKernel {
    pub fn new(k: usize, dt: f64) -> Self {
        let x = biharmonic_eigenvalue(k) * dt;
        Self {
            decay: (-x).exp(),
            gain: one_minus_exp_over(x),
        }
    }
}

/// Exact solution of the truncated-noise problem at every noise node
/// `t_0, …, t_N`. On each `T_n` mode `i` obeys
/// `û_i' + λ_i⁴ û_i = R^n_i / Δt`, giving
/// `û_i(t_n) = e^{-λ_i⁴Δt} û_i(t_{n-1}) + R^n_i (1 - e^{-λ_i⁴Δt}) / (λ_i⁴Δt)`.
pub fn exact_uhat(path: &NoisePath) -> Vec<SpectralField> {
    let modes = path.modes();
    let steps = path.intervals();
    let mut states = vec![vec![0.0; modes]; steps + 1];
    for i in 1..=modes {
        let kernel = UhatKernel::new(i, path.dt());
        let row = path.row(i);
        let mut u = 0.0;
        for n in 1..=steps {
            u = kernel.decay * u + kernel.gain * row[n - 1];
            states[n][i - 1] = u;
        }
    }
    states
        .into_iter()
        .map(SpectralField::from_vec_unchecked)
        .collect()
}

/// `û(t_N)` only, without storing the intermediate nodes.
pub fn exact_uhat_terminal(path: &NoisePath) -> SpectralField {
    let coeffs = (1..=path.modes())
        .map(|i| {
            let kernel = UhatKernel::new(i, path.dt());
            path.row(i)
                .iter()
                .fold(0.0, |u, r| kernel.decay * u + kernel.gain * r)
        })
        .collect();
    SpectralField::from_vec_unchecked(coeffs)
}

/// `φ(x) = 1/2 - tanh(x/2)/x`: the fraction of `‖g_i‖²` lost by interval
/// averaging, where `x = λ_i⁴ Δt`.
fn averaging_defect(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x2 / 24.0 - x2 * x2 / 240.0 + 17.0 * x2 * x2 * x2 / 40320.0
    } else {
        0.5 - (0.5 * x).tanh() / x
    }
}

/// `Σ_{i > k} (2λ_i⁴)^{-1}`.
pub fn modal_tail(k: usize) -> f64 {
    // direct sum over a block, then Euler-Maclaurin for the rest
    const BLOCK: usize = 2000;
    let direct: f64 = ((k + 1)..=(k + BLOCK))
        .rev()
        .map(|i| (i as f64).powi(-4))
        .sum();
    let m = (k + BLOCK) as f64;
    let rest = 1.0 / (3.0 * m.powi(3)) - 1.0 / (2.0 * m.powi(4)) + 1.0 / (3.0 * m.powi(5));
    (direct + rest) / (2.0 * PI.powi(4))
}

/// Smallest mode cut whose [`modal_tail`] is below `tol`.
pub fn mode_cut_for_tail(tol: f64) -> usize {
    let guess = (1.0 / (6.0 * PI.powi(4) * tol)).cbrt().ceil() as usize;
    let mut k = guess.saturating_sub(2).max(1);
    while modal_tail(k) >= tol {
        k += 1;
    }
    while k > 1 && modal_tail(k - 1) < tol {
        k -= 1;
    }
    k
}

/// Value of `E‖u(t) - û(t)‖²` truncated at `K_ref` modes, plus the analytic
/// remainder `Σ_{i>K_ref} (2λ_i⁴)^{-1}` bounding the omitted modes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelError {
    pub value: f64,
    pub tail: f64,
}

/// Exact modeling error `E‖u(t) - û(t)‖²_{0,D}` at a noise node `t`.
///
/// With `g_i(s) = 1_{(0,t)}(s) e^{-λ_i⁴(t-s)}`, modes `i ≤ M⋆` contribute
/// `‖g_i‖² - ‖Πg_i‖²` and modes `M⋆ < i ≤ K_ref` contribute `‖g_i‖²`.
/// Both norms are geometric sums in closed form.
pub fn model_error_exact(m_star: usize, dt: f64, t: f64, k_ref: usize) -> Result<ModelError> {
    if m_star == 0 {
        return Err(Error::ModeIndex(0));
    }
    if k_ref <= m_star {
        return Err(invalid(format!(
            "series cut K_ref = {k_ref} must exceed M* = {m_star}"
        )));
    }
    if !(dt > 0.0) {
        return Err(invalid(format!("noise step must be positive (got {dt})")));
    }
    if t < 0.0 {
        return Err(Error::NegativeTime(t));
    }
    let steps = t / dt;
    if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
        return Err(invalid(format!("t = {t} is not a node of the noise grid")));
    }
    let mut value = 0.0;
    for i in (1..=k_ref).rev() {
        let l4 = biharmonic_eigenvalue(i);
        let saturation = -(-2.0 * l4 * t).exp_m1();
        let contrib = if i <= m_star {
            saturation * averaging_defect(l4 * dt) / l4
        } else {
            saturation / (2.0 * l4)
        };
        value += contrib;
    }
    Ok(ModelError {
        value,
        tail: modal_tail(k_ref),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn basis_values() {
        assert!(close(eval_basis(1, 0.5).unwrap(), SQRT_2, 1e-15));
        assert_eq!(eval_basis(1, 0.0).unwrap(), 0.0);
        assert!(close(eval_basis(2, 0.25).unwrap(), SQRT_2, 1e-15));
        assert!(matches!(eval_basis(0, 0.3), Err(Error::ModeIndex(0))));
        assert!(eval_basis(1, 1.5).is_err());
    }

    #[test]
    fn eigenvalues() {
        assert_eq!(eigenvalue(1), PI);
        assert!(close(eigenvalue(3), 3.0 * PI, 1e-15));
        // π⁴ = 97.40909103400243723644...
        assert!(close(biharmonic_eigenvalue(1), 97.409_091_034_002_44, 1e-15));
    }

    #[test]
    fn hdot_norm_examples() {
        let e1 = SpectralField::unit(1, 3).unwrap();
        assert!(close(e1.hdot_norm(0.0), 1.0, 1e-15));
        assert!(close(e1.hdot_norm(2.0), PI * PI, 1e-14));
        let f = SpectralField::new(vec![1.0, 1.0]).unwrap();
        let expect = (PI.powi(-4) + (2.0 * PI).powi(-4)).sqrt();
        assert!(close(f.hdot_norm(-2.0), expect, 1e-14));
    }

    #[test]
    fn semigroup_examples() {
        let f = SpectralField::new(vec![0.3, -1.2, 4.0]).unwrap();
        assert_eq!(f.semigroup_apply(0.0).unwrap(), f);
        let e1 = SpectralField::unit(1, 1).unwrap();
        // exp(-0.01 π⁴) = 0.3775354111...
        let a = e1.semigroup_apply(0.01).unwrap().coeff(1);
        assert!(close(a, 0.377_535_411_143_026, 1e-13), "{a}");
        assert!(e1.semigroup_apply(100.0).unwrap().coeff(1) < 1e-300);
        assert!(matches!(e1.semigroup_apply(-1.0), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn inverse_elliptic() {
        let e3 = SpectralField::unit(3, 4).unwrap();
        let tb = e3.apply_inverse_elliptic(EllipticOrder::Fourth);
        assert!(close(tb.coeff(3), 1.0 / biharmonic_eigenvalue(3), 1e-15));
        let e1 = SpectralField::unit(1, 1).unwrap();
        let twice = e1
            .apply_inverse_elliptic(EllipticOrder::Second)
            .apply_inverse_elliptic(EllipticOrder::Second);
        assert!(close(
            twice.coeff(1),
            e1.apply_inverse_elliptic(EllipticOrder::Fourth).coeff(1),
            1e-15
        ));
        assert!(e1.apply_inverse_elliptic(EllipticOrder::Second).coeff(1) < 0.0);
        let z = SpectralField::zeros(5).apply_inverse_elliptic(EllipticOrder::Fourth);
        assert!(z.coeffs().iter().all(|&c| c == 0.0));
    }

    #[test]
    fn field_rejects_nonfinite() {
        assert!(SpectralField::new(vec![1.0, f64::NAN]).is_err());
        assert!(SpectralField::new(vec![]).is_err());
    }

    #[test]
    fn averaging_defect_branches_agree() {
        for &x in &[0.009, 0.0099, 0.01, 0.011] {
            let direct = 0.5 - (0.5_f64 * x).tanh() / x;
            assert!(close(averaging_defect(x), direct, 1e-7), "{x}");
        }
    }

    #[test]
    fn modal_tail_matches_zeta() {
        // Σ_{i≥1} i^{-4} = π⁴/90
        let total = 1.0 / 180.0;
        let head: f64 = (1..=10).map(|i| 1.0 / (2.0 * biharmonic_eigenvalue(i))).sum();
        assert!(close(modal_tail(10), total - head, 1e-10));
        let k = mode_cut_for_tail(1e-12);
        assert!(modal_tail(k) < 1e-12 && modal_tail(k - 1) >= 1e-12);
    }

    #[test]
    fn model_error_rejects_bad_cut() {
        assert!(model_error_exact(8, 1.0 / 64.0, 1.0, 8).is_err());
        assert!(model_error_exact(8, 1.0 / 64.0, 0.3, 100).is_err());
    }

    #[test]
    fn model_error_monotone_in_modes_and_step() {
        let dt = 1.0 / 256.0;
        let mut prev = f64::INFINITY;
        for m in [1, 2, 4, 8, 16, 32] {
            let v = model_error_exact(m, dt, 1.0, 200).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
        let mut prev = f64::INFINITY;
        for j in 2..12 {
            let v = model_error_exact(16, 0.5f64.powi(j), 1.0, 200).unwrap().value;
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn model_error_vanishes_in_the_limit() {
        let k = mode_cut_for_tail(1e-14);
        let e = model_error_exact(k, 2f64.powi(-60), 1.0, k + 1).unwrap();
        assert!(e.value < 1e-12, "{:?}", e);
        assert!(e.tail < 1e-14);
    }
}
