//! Strong errors of the stochastic schemes.
//!
//! Every error below is linear in the independent increments `R^n_i`, so
//! `E‖X‖² = Σ_{i,n} Δt ‖response to a unit increment at (i, n)‖²`. The exact
//! evaluators sum these impulse responses; the Monte Carlo evaluator samples
//! coupled paths and serves as an independent check.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::fem::{fem_vs_spectral_error, sine_load, FemSystem};
use crate::noise::sample_noise_indexed;
use crate::schemes::{
    cn_spectral_stochastic, run_fem_stochastic, sine_loads, CnFactors, CnFemOperator,
    SchemeConfig, StepOverlaps,
};
use crate::spectral::{exact_uhat_terminal, SpectralField, UhatKernel};

/// Spectral solution the fully discrete scheme is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// `û(T)`: total error of the scheme.
    Uhat,
    /// Time-discrete `U^M` on the same noise: isolates the space error.
    CnSpectral,
}

/// `N = T/Δt`, which must be an integer.
pub fn noise_intervals(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("noise step must be positive (got {dt})")));
    }
    let n = (horizon / dt).round();
    if n < 1.0 || (n * dt - horizon).abs() > 1e-9 * horizon {
        return Err(invalid(format!("noise step {dt} does not divide horizon {horizon}")));
    }
    Ok(n as usize)
}

/// Response of `U_i^M` to a unit increment on each noise interval.
pub(crate) fn cn_impulse(i: usize, cfg: &SchemeConfig, overlaps: &StepOverlaps, intervals: usize) -> Vec<f64> {
    let f = CnFactors::new(i, cfg.dtau());
    let mut c = vec![0.0; intervals];
    let mut power = f.gain;
    for m in (1..=cfg.steps).rev() {
        for &(n, w) in overlaps.step(m) {
            c[n - 1] += power * w;
        }
        power *= f.amplification;
    }
    c
}

/// Response of `û_i(T)` to a unit increment on each noise interval.
pub(crate) fn uhat_impulse(i: usize, dt: f64, intervals: usize) -> Vec<f64> {
    let k = UhatKernel::new(i, dt);
    let mut c = vec![0.0; intervals];
    let mut power = k.gain;
    for n in (0..intervals).rev() {
        c[n] = power;
        power *= k.decay;
    }
    c
}

/// Sums per-mode contributions in mode order.
fn ordered_sum(parts: Vec<f64>) -> f64 {
    parts.into_iter().sum()
}

/// Exact `E‖U^M - û(T)‖²_{0,D}` for noise with `m_star` modes and step `dt`.
pub fn strong_error_exact_time(m_star: usize, dt: f64, cfg: &SchemeConfig) -> Result<f64> {
    let intervals = noise_intervals(cfg.horizon, dt)?;
    let overlaps = StepOverlaps::new(cfg.steps, intervals);
    let parts = (1..=m_star)
        .into_par_iter()
        .map(|i| {
            let a = cn_impulse(i, cfg, &overlaps, intervals);
            let b = uhat_impulse(i, dt, intervals);
            dt * a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
        })
        .collect();
    Ok(ordered_sum(parts))
}

/// Exact `E‖U_h^M - g‖²_{0,D}` with `g = û(T)` or `g = U^M` per `reference`.
///
/// For each mode the responses `y_j = A^j K^{-1} b_i` with
/// `K = M + (Δτ/2)B`, `A = K^{-1}(M - (Δτ/2)B)` give every impulse response
/// as `Σ_m (|Δ_m ∩ T_n|/Δt) y_{M-m}`. The error against `c ε_i` splits
/// `M`-orthogonally into `‖f - c P_h ε_i‖²_M + c² ‖ε_i - P_h ε_i‖²`.
pub fn strong_error_exact_full(
    system: &FemSystem,
    m_star: usize,
    dt: f64,
    cfg: &SchemeConfig,
    reference: Reference,
) -> Result<f64> {
    let intervals = noise_intervals(cfg.horizon, dt)?;
    if m_star == 0 {
        return Ok(0.0);
    }
    let op = CnFemOperator::new(system, cfg.dtau())?;
    let overlaps = StepOverlaps::new(cfg.steps, intervals);
    let mut by_interval: Vec<Vec<(usize, f64)>> = vec![Vec::new(); intervals];
    for m in 1..=cfg.steps {
        for &(n, w) in overlaps.step(m) {
            by_interval[n - 1].push((m, w));
        }
    }
    let space = system.space();
    let dim = space.dim();
    let mass = system.mass();

    let parts = (1..=m_star)
        .into_par_iter()
        .map(|i| {
            let unit = SpectralField::unit(i, i).expect("mode index is positive");
            let proj = system.l2_project(&unit);
            let proj_err = fem_vs_spectral_error(space, proj.as_slice(), &unit).powi(2);
            let coeffs = match reference {
                Reference::Uhat => uhat_impulse(i, dt, intervals),
                Reference::CnSpectral => cn_impulse(i, cfg, &overlaps, intervals),
            };

            let mut responses = Vec::with_capacity(cfg.steps);
            responses.push(op.solve_implicit(sine_load(space, i).as_slice()));
            for j in 1..cfg.steps {
                let next = op.step(&responses[j - 1], None);
                responses.push(next);
            }

            let mut diff = vec![0.0; dim];
            let mut acc = 0.0;
            for (n, c) in coeffs.iter().enumerate() {
                diff.iter_mut()
                    .zip(proj.as_slice())
                    .for_each(|(d, p)| *d = -c * p);
                for &(m, w) in &by_interval[n] {
                    let y = &responses[cfg.steps - m];
                    diff.iter_mut().zip(y).for_each(|(d, v)| *d += w * v);
                }
                acc += mass.quad_form(&diff) + c * c * proj_err;
            }
            dt * acc
        })
        .collect();
    Ok(ordered_sum(parts))
}

/// Sample mean and its standard error of `f(0), …, f(samples-1)`.
///
/// Samples run in parallel; the reduction is sequential in sample order, so
/// the result does not depend on the thread count.
pub fn monte_carlo<F>(samples: usize, f: F) -> Result<(f64, f64)>
where
    F: Fn(u64) -> Result<f64> + Sync,
{
    if samples < 2 {
        return Err(invalid("Monte Carlo needs at least 2 samples"));
    }
    let values = (0..samples as u64)
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<f64>>>()?;
    let n = samples as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Scheme error to estimate by sampling.
#[derive(Debug, Clone, Copy)]
pub enum McSetup<'a> {
    /// `‖U^M - û(T)‖²`.
    Time {
        m_star: usize,
        dt: f64,
        cfg: SchemeConfig,
    },
    /// `‖U_h^M - g‖²` with `g` per `reference`.
    Full {
        system: &'a FemSystem,
        m_star: usize,
        dt: f64,
        cfg: SchemeConfig,
        reference: Reference,
    },
}

/// Monte Carlo estimate `(mean, standard error)` of the squared error over
/// `samples` independent paths; sample `k` uses the noise stream `(seed, k)`.
pub fn mc_strong_error(setup: &McSetup<'_>, samples: usize, seed: u64) -> Result<(f64, f64)> {
    match *setup {
        McSetup::Time { m_star, dt, cfg } => {
            let intervals = noise_intervals(cfg.horizon, dt)?;
            if m_star == 0 {
                return monte_carlo(samples, |_| Ok(0.0));
            }
            monte_carlo(samples, |k| {
                let path = sample_noise_indexed(m_star, intervals, cfg.horizon, seed, k)?;
                let u = cn_spectral_stochastic(&path, &cfg)?;
                let e = u[cfg.steps].sub(&exact_uhat_terminal(&path)).l2_norm();
                Ok(e * e)
            })
        }
        McSetup::Full {
            system,
            m_star,
            dt,
            cfg,
            reference,
        } => {
            let intervals = noise_intervals(cfg.horizon, dt)?;
            if m_star == 0 {
                return monte_carlo(samples, |_| Ok(0.0));
            }
            let op = CnFemOperator::new(system, cfg.dtau())?;
            let loads = sine_loads(system, m_star);
            monte_carlo(samples, |k| {
                let path = sample_noise_indexed(m_star, intervals, cfg.horizon, seed, k)?;
                let uh = run_fem_stochastic(&op, &loads, &path, &cfg);
                let g = match reference {
                    Reference::Uhat => exact_uhat_terminal(&path),
                    Reference::CnSpectral => cn_spectral_stochastic(&path, &cfg)?.swap_remove(cfg.steps),
                };
                let e = fem_vs_spectral_error(system.space(), uh[cfg.steps].as_slice(), &g);
                Ok(e * e)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FemSpace;
    use crate::noise::sample_noise;

    #[test]
    fn noise_intervals_validation() {
        assert_eq!(noise_intervals(1.0, 0.25).unwrap(), 4);
        assert_eq!(noise_intervals(1.0, 2f64.powi(-12)).unwrap(), 4096);
        assert!(noise_intervals(1.0, 0.3).is_err());
        assert!(noise_intervals(1.0, 0.0).is_err());
    }

    #[test]
    fn impulses_reproduce_scheme_outputs() {
        let path = sample_noise(3, 12, 1.0, 5).unwrap();
        let cfg = SchemeConfig::new(1.0, 4).unwrap();
        let ov = StepOverlaps::new(4, 12);
        let u = cn_spectral_stochastic(&path, &cfg).unwrap();
        let uh = exact_uhat_terminal(&path);
        for i in 1..=3 {
            let c = cn_impulse(i, &cfg, &ov, 12);
            let d = uhat_impulse(i, path.dt(), 12);
            let a: f64 = c.iter().zip(path.row(i)).map(|(x, r)| x * r).sum();
            let b: f64 = d.iter().zip(path.row(i)).map(|(x, r)| x * r).sum();
            assert!((a - u[4].coeff(i)).abs() < 1e-13);
            assert!((b - uh.coeff(i)).abs() < 1e-13);
        }
    }

    #[test]
    fn identical_kernels_give_zero() {
        // û stepping on the noise grid against itself
        let dt = 1.0 / 64.0;
        let total: f64 = (1..=8)
            .map(|i| {
                let a = uhat_impulse(i, dt, 64);
                let b = uhat_impulse(i, dt, 64);
                a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
            })
            .sum();
        assert_eq!(total, 0.0);
    }

    #[test]
    fn time_error_decreases_with_dtau() {
        let mut prev = f64::INFINITY;
        for steps in [8, 16, 32, 64] {
            let cfg = SchemeConfig::new(1.0, steps).unwrap();
            let e = strong_error_exact_time(16, 1.0 / 256.0, &cfg).unwrap();
            assert!(e < prev);
            prev = e;
        }
    }

    #[test]
    fn full_error_zero_modes() {
        let sys = FemSystem::new(FemSpace::uniform(4, 3).unwrap()).unwrap();
        let cfg = SchemeConfig::new(1.0, 4).unwrap();
        assert_eq!(strong_error_exact_full(&sys, 0, 0.25, &cfg, Reference::Uhat).unwrap(), 0.0);
        let mc = mc_strong_error(
            &McSetup::Time { m_star: 0, dt: 0.25, cfg },
            4,
            1,
        )
        .unwrap();
        assert_eq!(mc, (0.0, 0.0));
    }

    #[test]
    fn full_error_matches_direct_impulse_runs() {
        // one scheme run per unit increment, error by quadrature
        let sys = FemSystem::new(FemSpace::uniform(4, 2).unwrap()).unwrap();
        let cfg = SchemeConfig::new(1.0, 3).unwrap();
        let (m_star, n) = (2, 6);
        let dt = 1.0 / n as f64;
        let op = CnFemOperator::new(&sys, cfg.dtau()).unwrap();
        let loads = sine_loads(&sys, m_star);
        for reference in [Reference::Uhat, Reference::CnSpectral] {
            let mut direct = 0.0;
            for i in 1..=m_star {
                for k in 1..=n {
                    let mut inc = crate::noise::ModeIntervalMatrix::zeros(m_star, n);
                    inc.set(i, k, 1.0);
                    let path = crate::noise::NoisePath::new(dt, inc).unwrap();
                    let uh = run_fem_stochastic(&op, &loads, &path, &cfg);
                    let g = match reference {
                        Reference::Uhat => exact_uhat_terminal(&path),
                        Reference::CnSpectral => {
                            cn_spectral_stochastic(&path, &cfg).unwrap().swap_remove(3)
                        }
                    };
                    direct += dt * fem_vs_spectral_error(sys.space(), uh[3].as_slice(), &g).powi(2);
                }
            }
            let exact = strong_error_exact_full(&sys, m_star, dt, &cfg, reference).unwrap();
            assert!((exact - direct).abs() < 1e-10 * direct, "{exact} vs {direct}");
        }
    }

    #[test]
    fn monte_carlo_standard_error_scaling() {
        let cfg = SchemeConfig::new(1.0, 4).unwrap();
        let setup = McSetup::Time { m_star: 4, dt: 1.0 / 16.0, cfg };
        let (_, s1) = mc_strong_error(&setup, 2000, 3).unwrap();
        let (_, s2) = mc_strong_error(&setup, 4000, 3).unwrap();
        let ratio = s2 / s1;
        assert!((0.6..=0.85).contains(&ratio), "{ratio}");
        assert!(mc_strong_error(&setup, 1, 3).is_err());
    }
}
