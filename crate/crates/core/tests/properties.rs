use cnfem::experiments::{rate_regression, ErrorCurve, ParameterKind};
use cnfem::fem::{fem_vs_spectral_h2_error, solve_tbh, FemSpace, FemSystem};
use cnfem::noise::{coarsen_time, piecewise_norm_sq, project_pi, sample_noise, ModeIntervalMatrix};
use cnfem::schemes::{cn_fem_stochastic, cn_spectral_stochastic, CnFactors, SchemeConfig, StepOverlaps};
use cnfem::spectral::{biharmonic_eigenvalue, model_error_exact, EllipticOrder, SpectralField};
use proptest::prelude::*;

fn field() -> impl Strategy<Value = SpectralField> {
    proptest::collection::vec(-10.0f64..10.0, 1..24).prop_map(|v| SpectralField::new(v).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval(f in field()) {
        let direct: f64 = f.coeffs().iter().map(|a| a * a).sum();
        prop_assert!(rel(f.hdot_norm(0.0).powi(2), direct) < 1e-14);
    }

    #[test]
    fn semigroup_property(f in field(), s in 0.0f64..0.01, t in 0.0f64..0.01) {
        let two = f.semigroup_apply(s).unwrap().semigroup_apply(t).unwrap();
        let one = f.semigroup_apply(s + t).unwrap();
        for (k, (a, b)) in two.coeffs().iter().zip(one.coeffs()).enumerate() {
            // exp amplifies the rounding of its argument by the argument size
            let cond = (biharmonic_eigenvalue(k + 1) * (s + t)).max(1.0);
            prop_assert!((a - b).abs() <= 1e-13 * cond * a.abs().max(b.abs()) + 1e-300);
        }
        prop_assert!(one.l2_norm() <= f.l2_norm() * (1.0 + 1e-15));
    }

    #[test]
    fn inverse_biharmonic_identity(f in field()) {
        let back = f.apply_inverse_elliptic(EllipticOrder::Fourth).apply_biharmonic();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300) * 4.0);
        }
    }

    #[test]
    fn hdot_norms_increase_with_order(f in field(), s in -2.0f64..2.0, ds in 0.0f64..2.0) {
        prop_assert!(f.hdot_norm(s) <= f.hdot_norm(s + ds) * (1.0 + 1e-14));
    }

    #[test]
    fn amplification_below_one(k in 1usize..2_000, log_dtau in -9.0f64..0.0) {
        let f = CnFactors::new(k, 10f64.powf(log_dtau));
        prop_assert!(f.amplification.abs() < 1.0);
        prop_assert!(f.gain > 0.0 && f.gain <= 1.0);
    }

    #[test]
    fn overlaps_partition_both_grids(m in 1usize..40, n in 1usize..40) {
        let ov = StepOverlaps::new(m, n);
        let mut per_interval = vec![0.0; n];
        for step in 1..=m {
            let total: f64 = ov.step(step).iter().map(|p| p.1).sum();
            prop_assert!((total - n as f64 / m as f64).abs() < 1e-12);
            for &(j, w) in ov.step(step) {
                per_interval[j - 1] += w;
            }
        }
        prop_assert!(per_interval.iter().all(|w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn coarsening_keeps_terminal_values(seed in 0u64..1000, modes in 1usize..6, k in 0u32..4) {
        let path = sample_noise(modes, 16, 1.0, seed).unwrap();
        let coarse = coarsen_time(&path, 1 << k).unwrap();
        for i in 1..=modes {
            prop_assert!((coarse.terminal_value(i) - path.terminal_value(i)).abs() < 1e-13);
        }
    }

    #[test]
    fn projection_contracts(vals in proptest::collection::vec(-5.0f64..5.0, 1..8), n in 1usize..8, modes in 1usize..8) {
        // g piecewise linear in time per mode: ∫_{T_n} g = Δt·(midpoint value)
        let dt = 1.0 / n as f64;
        let g_modes = vals.len();
        let slope = |i: usize| vals[i - 1];
        let integrals = ModeIntervalMatrix::from_fn(g_modes, n, |i, k| {
            dt * slope(i) * (k as f64 - 0.5) * dt
        });
        let projected = project_pi(&integrals, modes, dt).unwrap();
        // ‖g‖² = Σ_i slope_i² ∫_0^1 t² dt
        let g_norm: f64 = vals.iter().map(|s| s * s / 3.0).sum();
        prop_assert!(piecewise_norm_sq(&projected, dt) <= g_norm * (1.0 + 1e-12));
    }

    #[test]
    fn stochastic_schemes_superpose(s1 in 0u64..500, s2 in 0u64..500, c in -3.0f64..3.0) {
        let a = sample_noise(3, 8, 1.0, s1).unwrap();
        let b = sample_noise(3, 8, 1.0, s2 + 1000).unwrap();
        let comb = a.add(&b.scaled(c)).unwrap();
        let cfg = SchemeConfig::new(1.0, 4).unwrap();
        let (ua, ub, uc) = (
            cn_spectral_stochastic(&a, &cfg).unwrap(),
            cn_spectral_stochastic(&b, &cfg).unwrap(),
            cn_spectral_stochastic(&comb, &cfg).unwrap(),
        );
        prop_assert!(ua[4].add(&ub[4].scale(c)).sub(&uc[4]).l2_norm() < 1e-12);
        let sys = FemSystem::new(FemSpace::uniform(4, 3).unwrap()).unwrap();
        let (ha, hb, hc) = (
            cn_fem_stochastic(&sys, &a, &cfg).unwrap(),
            cn_fem_stochastic(&sys, &b, &cfg).unwrap(),
            cn_fem_stochastic(&sys, &comb, &cfg).unwrap(),
        );
        for j in 0..sys.space().dim() {
            prop_assert!((ha[4].0[j] + c * hb[4].0[j] - hc[4].0[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_and_stiffness_positive(n in 2usize..24, p in 2usize..4, v in proptest::collection::vec(-1.0f64..1.0, 48)) {
        let sys = FemSystem::new(FemSpace::uniform(n, p).unwrap()).unwrap();
        let x = &v[..sys.space().dim()];
        if x.iter().any(|a| *a != 0.0) {
            prop_assert!(sys.l2_norm_sq(x) > 0.0);
            prop_assert!(sys.h2_seminorm_sq(x) > 0.0);
        }
    }
}

#[test]
fn model_error_monotone() {
    let mut prev = f64::INFINITY;
    for m in [2, 4, 8, 16, 32, 64] {
        let e = model_error_exact(m, 1.0 / 256.0, 1.0, 4096).unwrap();
        assert!(e.value < prev);
        prev = e.value;
    }
    let mut prev = f64::INFINITY;
    for k in 2..12 {
        let e = model_error_exact(16, 0.5f64.powi(k), 1.0, 4096).unwrap();
        assert!(e.value <= prev);
        prev = e.value;
    }
}

#[test]
fn ritz_projection_h2_rate() {
    // the energy-norm best approximation bounds interpolation from below,
    // so its rate is the interpolation rate p - 1
    let e1 = SpectralField::unit(1, 1).unwrap();
    let exact = e1.scale(biharmonic_eigenvalue(1).recip());
    for p in [2, 3] {
        let pts = [8, 16, 32, 64, 128]
            .into_iter()
            .map(|n| {
                let space = FemSpace::uniform(n, p).unwrap();
                let v = solve_tbh(&space, &e1).unwrap();
                (space.h(), fem_vs_spectral_h2_error(&space, v.as_slice(), &exact))
            })
            .collect();
        let r = rate_regression(&ErrorCurve::new(ParameterKind::MeshSize, pts).unwrap()).unwrap();
        assert!((r.slope - (p as f64 - 1.0)).abs() <= 0.2, "p={p}: {}", r.slope);
    }
}
