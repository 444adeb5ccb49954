//! Independent oracles for the exact evaluators.

use cnfem::experiments::{mc_strong_error, strong_error_exact_full, strong_error_exact_time, McSetup, Reference};
use cnfem::fem::{FemSpace, FemSystem};
use cnfem::noise::sample_noise;
use cnfem::schemes::SchemeConfig;
use cnfem::spectral::{biharmonic_eigenvalue, exact_uhat, model_error_exact};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[test]
fn uhat_matches_adaptive_quadrature() {
    let path = sample_noise(3, 4, 0.1, 17).unwrap();
    let u = exact_uhat(&path);
    let dt = path.dt();
    for n in 1..=4 {
        let t = n as f64 * dt;
        for i in 1..=3 {
            let lam = biharmonic_eigenvalue(i);
            let mut quad = 0.0;
            for k in 1..=n {
                let w = path.increment(i, k) / dt;
                let f = move |s: f64| (-lam * (t - s)).exp() * w;
                quad += simpson(&f, (k - 1) as f64 * dt, k as f64 * dt, 1e-15);
            }
            let got = u[n].coeff(i);
            assert!((got - quad).abs() <= 1e-10 * quad.abs(), "n={n} i={i}: {got} vs {quad}");
        }
    }
}

#[test]
fn model_error_matches_bivariate_monte_carlo() {
    // per interval draw (ΔB, ∫_{T_n} e^{-λ(t_n - s)} dB) from its exact joint law
    let (m_star, k_ref, intervals, t) = (3usize, 6usize, 8usize, 0.05);
    let dt = t / intervals as f64;
    let samples = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut draws = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut err_sq = 0.0;
        for i in 1..=k_ref {
            let lam = biharmonic_eigenvalue(i);
            let var_b = dt;
            let var_j = -(-2.0 * lam * dt).exp_m1() / (2.0 * lam);
            let cov = -(-lam * dt).exp_m1() / lam;
            let l11 = var_b.sqrt();
            let l21 = cov / l11;
            let l22 = (var_j - l21 * l21).max(0.0).sqrt();
            let gain = -(-lam * dt).exp_m1() / (lam * dt);
            let mut diff = 0.0;
            for n in 1..=intervals {
                let z1: f64 = StandardNormal.sample(&mut rng);
                let z2: f64 = StandardNormal.sample(&mut rng);
                let db = l11 * z1;
                let j = l21 * z1 + l22 * z2;
                let decay = (-lam * (t - n as f64 * dt)).exp();
                let uhat = if i <= m_star { gain * db } else { 0.0 };
                diff += decay * (j - uhat);
            }
            err_sq += diff * diff;
        }
        draws.push(err_sq);
    }
    let n = samples as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let se = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    let exact = model_error_exact(m_star, dt, t, k_ref).unwrap().value;
    assert!((mean - exact).abs() <= 3.0 * se, "{mean} ± {se} vs {exact}");
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn evaluators_independent_of_thread_count() {
    let cfg = SchemeConfig::new(1.0, 16).unwrap();
    let sys = FemSystem::new(FemSpace::uniform(8, 3).unwrap()).unwrap();
    let run = || {
        (
            strong_error_exact_time(32, 1.0 / 256.0, &cfg).unwrap(),
            strong_error_exact_full(&sys, 16, 1.0 / 64.0, &cfg, Reference::Uhat).unwrap(),
            mc_strong_error(&McSetup::Time { m_star: 4, dt: 1.0 / 64.0, cfg }, 300, 5).unwrap(),
        )
    };
    let one = in_pool(1, run);
    for threads in [2, 3, 8] {
        let other = in_pool(threads, run);
        assert_eq!(one.0.to_bits(), other.0.to_bits());
        assert_eq!(one.1.to_bits(), other.1.to_bits());
        assert_eq!(one.2 .0.to_bits(), other.2 .0.to_bits());
        assert_eq!(one.2 .1.to_bits(), other.2 .1.to_bits());
    }
}

#[test]
fn full_error_non_increasing_under_refinement() {
    // against U^M only: against û the space and time errors interact, and
    // coarse meshes damp the high modes that Crank-Nicolson leaves undamped
    let cfg = SchemeConfig::new(1.0, 64).unwrap();
    let dt = 1.0 / 64.0;
    for p in [2, 3] {
        let mut prev = f64::INFINITY;
        let mut last_total = 0.0;
        for n in [4, 8, 16, 32, 64] {
            let sys = FemSystem::new(FemSpace::uniform(n, p).unwrap()).unwrap();
            let e = strong_error_exact_full(&sys, 16, dt, &cfg, Reference::CnSpectral).unwrap();
            assert!(e <= prev, "p={p} n={n}");
            prev = e;
            last_total = strong_error_exact_full(&sys, 16, dt, &cfg, Reference::Uhat).unwrap();
        }
        let time_only = strong_error_exact_time(16, dt, &cfg).unwrap();
        assert!((last_total - time_only).abs() < 1e-2 * time_only, "p={p}: {last_total} vs {time_only}");
    }
}

#[test]
fn time_error_matches_monte_carlo_on_unaligned_grids() {
    // scheme steps straddle noise intervals
    for (steps, intervals) in [(6, 9), (10, 4)] {
        let cfg = SchemeConfig::new(1.0, steps).unwrap();
        let dt = 1.0 / intervals as f64;
        let exact = strong_error_exact_time(6, dt, &cfg).unwrap();
        let (mc, se) = mc_strong_error(&McSetup::Time { m_star: 6, dt, cfg }, 10_000, 21).unwrap();
        assert!((mc - exact).abs() <= 3.0 * se, "{steps}/{intervals}: {mc} ± {se} vs {exact}");
    }
}
