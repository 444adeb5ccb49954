//! Spectral space-time white-noise increments.
//!
//! A [`NoisePath`] holds `R^n_i = ∫_{T_n}∫_D ε_i dW`, the increments of the
//! independent Brownian motions `B^i` over a uniform grid of `[0,T]`. Coarser
//! grids and fewer modes are always derived from one fine path
//! ([`coarsen_time`], [`truncate_modes`]) so that refinement studies share a
//! single Wiener realization.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};

/// Dense `modes × intervals` matrix, mode-major. Entry `(i, n)` is stored at
/// `(i-1) * intervals + (n-1)`; both indices are 1-based in the accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeIntervalMatrix {
    modes: usize,
    intervals: usize,
    data: Vec<f64>,
}

impl ModeIntervalMatrix {
    pub fn zeros(modes: usize, intervals: usize) -> Self {
        Self {
            modes,
            intervals,
            data: vec![0.0; modes * intervals],
        }
    }

    pub fn from_fn(modes: usize, intervals: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(modes * intervals);
        for i in 1..=modes {
            for n in 1..=intervals {
                data.push(f(i, n));
            }
        }
        Self {
            modes,
            intervals,
            data,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    #[inline]
    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.data[(i - 1) * self.intervals + (n - 1)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, n: usize, v: f64) {
        self.data[(i - 1) * self.intervals + (n - 1)] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[(i - 1) * self.intervals..i * self.intervals]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Wiener increments `R^n_i` for `i = 1..=modes`, `n = 1..=intervals` on a
/// uniform grid of width `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    dt: f64,
    increments: ModeIntervalMatrix,
}

impl NoisePath {
    pub fn new(dt: f64, increments: ModeIntervalMatrix) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("noise step must be positive (got {dt})")));
        }
        if increments.modes == 0 || increments.intervals == 0 {
            return Err(invalid("noise path needs at least one mode and one interval"));
        }
        Ok(Self { dt, increments })
    }

    /// Path with all increments zero.
    pub fn zeros(modes: usize, intervals: usize, horizon: f64) -> Result<Self> {
        Self::new(
            horizon / intervals.max(1) as f64,
            ModeIntervalMatrix::zeros(modes, intervals),
        )
    }

    pub fn modes(&self) -> usize {
        self.increments.modes
    }

    pub fn intervals(&self) -> usize {
        self.increments.intervals
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.intervals() as f64
    }

    /// `R^n_i` (1-based).
    #[inline]
    pub fn increment(&self, i: usize, n: usize) -> f64 {
        self.increments.get(i, n)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.increments.row(i)
    }

    pub fn increments(&self) -> &ModeIntervalMatrix {
        &self.increments
    }

    /// `B^i(T)`, the terminal value of the `i`-th Brownian motion.
    pub fn terminal_value(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.increments.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Entrywise sum of two paths on the same grid.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.modes() != other.modes()
            || self.intervals() != other.intervals()
            || (self.dt - other.dt).abs() > 1e-15 * self.dt
        {
            return Err(invalid("paths live on different grids"));
        }
        let mut out = self.clone();
        for (a, b) in out.increments.data.iter_mut().zip(&other.increments.data) {
            *a += b;
        }
        Ok(out)
    }

    /// Writes the binary format: `modes: u64`, `intervals: u64`, `dt: f64`,
    /// then the increments row-major (mode-major), all little-endian.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&(self.modes() as u64).to_le_bytes())?;
        w.write_all(&(self.intervals() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for v in &self.increments.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let modes = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let intervals = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let dt = f64::from_le_bytes(word);
        let len = modes
            .checked_mul(intervals)
            .ok_or_else(|| invalid("noise dump header overflows"))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            r.read_exact(&mut word)?;
            data.push(f64::from_le_bytes(word));
        }
        Self::new(
            dt,
            ModeIntervalMatrix {
                modes,
                intervals,
                data,
            },
        )
    }
}

/// Random stream for one Monte Carlo sample: ChaCha8 keyed by `seed`, with the
/// sample index selecting an independent stream.
pub fn sample_rng(seed: u64, sample: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample);
    rng
}

/// Samples `R^n_i ~ N(0, T/N)` i.i.d.; equivalent to
/// `sample_noise_indexed(.., seed, 0)`.
pub fn sample_noise(modes: usize, intervals: usize, horizon: f64, seed: u64) -> Result<NoisePath> {
    sample_noise_indexed(modes, intervals, horizon, seed, 0)
}

/// Samples the path of Monte Carlo sample `sample` under `seed`. Draws are
/// consumed mode-major then by interval, so a path depends only on
/// `(seed, sample)`.
pub fn sample_noise_indexed(
    modes: usize,
    intervals: usize,
    horizon: f64,
    seed: u64,
    sample: u64,
) -> Result<NoisePath> {
    if modes == 0 || intervals == 0 {
        return Err(invalid("noise path needs at least one mode and one interval"));
    }
    if !(horizon > 0.0) {
        return Err(invalid(format!("horizon must be positive (got {horizon})")));
    }
    let dt = horizon / intervals as f64;
    let sd = dt.sqrt();
    let mut rng = sample_rng(seed, sample);
    let data = (0..modes * intervals)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sd * z
        })
        .collect();
    NoisePath::new(
        dt,
        ModeIntervalMatrix {
            modes,
            intervals,
            data,
        },
    )
}

/// Merges `factor` consecutive intervals by summing their increments.
pub fn coarsen_time(path: &NoisePath, factor: usize) -> Result<NoisePath> {
    if factor == 0 || path.intervals() % factor != 0 {
        return Err(invalid(format!(
            "coarsening factor {factor} does not divide {} intervals",
            path.intervals()
        )));
    }
    let coarse = path.intervals() / factor;
    let mut out = ModeIntervalMatrix::zeros(path.modes(), coarse);
    for i in 1..=path.modes() {
        for (m, chunk) in path.row(i).chunks_exact(factor).enumerate() {
            out.set(i, m + 1, chunk.iter().sum());
        }
    }
    NoisePath::new(path.dt * factor as f64, out)
}

/// Keeps the first `m_star` modes.
pub fn truncate_modes(path: &NoisePath, m_star: usize) -> Result<NoisePath> {
    if m_star == 0 || m_star > path.modes() {
        return Err(Error::OutOfRange(format!(
            "mode cut {m_star} outside 1..={}",
            path.modes()
        )));
    }
    let n = path.intervals();
    let data = path.increments.data[..m_star * n].to_vec();
    NoisePath::new(
        path.dt,
        ModeIntervalMatrix {
            modes: m_star,
            intervals: n,
            data,
        },
    )
}

/// Sine coefficient `R^n_i / Δt` of `Ŵ` on `T_n`.
pub fn what_coeff(path: &NoisePath, n: usize, i: usize) -> Result<f64> {
    if i == 0 || i > path.modes() || n == 0 || n > path.intervals() {
        return Err(Error::OutOfRange(format!(
            "(n={n}, i={i}) outside {}×{} grid",
            path.intervals(),
            path.modes()
        )));
    }
    Ok(path.increment(i, n) / path.dt)
}

/// Applies the interval-average projection `Π`. `integrals` carries
/// `∫_{T_n} (g(s,·), ε_i) ds` for modes `1..=integrals.modes()`; modes beyond
/// `modes` are discarded. The result holds the coefficients of `Πg` on each
/// `T_n`.
pub fn project_pi(
    integrals: &ModeIntervalMatrix,
    modes: usize,
    dt: f64,
) -> Result<ModeIntervalMatrix> {
    if !(dt > 0.0) {
        return Err(invalid(format!("noise step must be positive (got {dt})")));
    }
    let n = integrals.intervals();
    Ok(ModeIntervalMatrix::from_fn(modes, n, |i, k| {
        if i <= integrals.modes() {
            integrals.get(i, k) / dt
        } else {
            0.0
        }
    }))
}

/// `‖ψ‖²_{L²((0,T)×D)}` of a function that is piecewise constant in time with
/// the given sine coefficients.
pub fn piecewise_norm_sq(coeffs: &ModeIntervalMatrix, dt: f64) -> f64 {
    dt * coeffs.as_slice().iter().map(|c| c * c).sum::<f64>()
}

/// `Σ_{i,n} c_{i,n} R^n_i`: the Itô integral of the simple integrand with
/// coefficient `c_{i,n}` on `T_n × ε_i`.
pub fn simple_integral(path: &NoisePath, coeffs: &ModeIntervalMatrix) -> f64 {
    let modes = coeffs.modes().min(path.modes());
    let n = coeffs.intervals().min(path.intervals());
    let mut acc = 0.0;
    for i in 1..=modes {
        let row = path.row(i);
        let c = coeffs.row(i);
        acc += row[..n].iter().zip(&c[..n]).map(|(r, c)| r * c).sum::<f64>();
    }
    acc
}

/// Both sides of the identity `∫∫ Πg dW = ∫∫ Ŵ g`.
///
/// The left side is the Itô integral of the simple process `Πg`; the right
/// side pairs the per-interval mode integrals of `g` with `R^n_i / Δt`.
pub fn ito_vs_inner_identity(path: &NoisePath, integrals: &ModeIntervalMatrix) -> Result<(f64, f64)> {
    if integrals.intervals() != path.intervals() {
        return Err(invalid("integrand and path have different time grids"));
    }
    let projected = project_pi(integrals, path.modes(), path.dt)?;
    let lhs = simple_integral(path, &projected);

    let modes = integrals.modes().min(path.modes());
    let mut rhs = 0.0;
    for n in 1..=path.intervals() {
        for i in 1..=modes {
            rhs += what_coeff(path, n, i)? * integrals.get(i, n);
        }
    }
    Ok((lhs, rhs))
}
