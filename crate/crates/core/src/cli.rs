//! Batch study runner.
//!
//! A study is configured by defaults for its kind, then an optional
//! `key = value` file, then command-line flags. Results go to
//! `<out>/results.csv` and `<out>/summary.txt`; the sample-path study writes
//! `<out>/sample_path.csv` instead of results rows.

use std::ffi::OsString;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;

use crate::error::{Error, Result};
use crate::experiments::{
    deterministic_curve, mc_strong_error, rate_regression, strong_error_exact_full,
    strong_error_exact_time, DeterministicProp, ErrorCurve, McSetup, ParameterKind, RateReport,
    Reference, Refinement,
};
use crate::fem::{FemSpace, FemSystem};
use crate::noise::{ito_vs_inner_identity, sample_noise, sample_noise_indexed, simple_integral, ModeIntervalMatrix};
use crate::schemes::{cn_fem_deterministic, cn_fem_stochastic, SchemeConfig};
use crate::spectral::{exact_uhat, mode_cut_for_tail, model_error_exact, SpectralField};

/// Environment variable overriding the default output directory.
pub const OUT_DIR_ENV: &str = "CNFEM_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "cnfem-out";
const MIN_R2: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StudyKind {
    TimeRate,
    SpaceRate,
    ModelErrorModes,
    ModelErrorDt,
    DeterministicRates,
    SamplePath,
    Selftest,
}

impl StudyKind {
    pub const ALL: [StudyKind; 7] = [
        Self::TimeRate,
        Self::SpaceRate,
        Self::ModelErrorModes,
        Self::ModelErrorDt,
        Self::DeterministicRates,
        Self::SamplePath,
        Self::Selftest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::TimeRate => "time-rate",
            Self::SpaceRate => "space-rate",
            Self::ModelErrorModes => "model-error-modes",
            Self::ModelErrorDt => "model-error-dt",
            Self::DeterministicRates => "deterministic-rates",
            Self::SamplePath => "sample-path",
            Self::Selftest => "selftest",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown study '{s}'")))
    }
}

/// Full parameter set of a study run.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub study: StudyKind,
    pub horizon: f64,
    /// Noise modes `M⋆`.
    pub modes: usize,
    /// Noise step `Δt`.
    pub dt: f64,
    /// Step counts `M` refined by time studies.
    pub steps: Vec<usize>,
    /// Step count held fixed by space studies and the sample path.
    pub fixed_steps: usize,
    pub elements: Vec<usize>,
    pub degree: usize,
    /// Mode counts of the modeling-error study.
    pub mode_list: Vec<usize>,
    /// Noise steps of the modeling-error study.
    pub dt_list: Vec<f64>,
    /// Series cut for the modeling error; `0` picks the cut with tail below `1e-12`.
    pub k_ref: usize,
    pub reference: Reference,
    /// `0` evaluates strong errors exactly; otherwise Monte Carlo with this many samples.
    pub samples: usize,
    pub seed: u64,
    pub out: PathBuf,
}

fn dyadic_counts(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

impl StudyConfig {
    pub fn defaults(study: StudyKind) -> Self {
        let out = std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
        let mut cfg = Self {
            study,
            horizon: 1.0,
            modes: 64,
            dt: 2f64.powi(-12),
            steps: dyadic_counts(4, 9),
            fixed_steps: 1024,
            elements: dyadic_counts(3, 7),
            degree: 3,
            mode_list: dyadic_counts(2, 6),
            dt_list: (4..=9).map(|k| 2f64.powi(-k)).collect(),
            k_ref: 0,
            reference: Reference::CnSpectral,
            samples: 0,
            seed: 1,
            out,
        };
        match study {
            StudyKind::SpaceRate => {
                cfg.modes = 32;
                cfg.dt = 2f64.powi(-10);
            }
            StudyKind::ModelErrorModes => {
                cfg.dt = 2f64.powi(-14);
                cfg.k_ref = 1 << 20;
            }
            StudyKind::DeterministicRates => {
                cfg.steps = dyadic_counts(8, 12);
                cfg.fixed_steps = 64;
            }
            StudyKind::SamplePath => {
                cfg.modes = 32;
                cfg.dt = 2f64.powi(-8);
                cfg.fixed_steps = 256;
                cfg.elements = vec![32];
            }
            StudyKind::Selftest => cfg.samples = 4000,
            _ => {}
        }
        cfg
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("invalid {what} '{value}' for key '{key}'"));
        match key {
            "study" => self.study = value.parse()?,
            "horizon" | "T" => self.horizon = parse_real(value).ok_or_else(|| bad("number"))?,
            "modes" => self.modes = value.parse().map_err(|_| bad("integer"))?,
            "dt" => self.dt = parse_real(value).ok_or_else(|| bad("number"))?,
            "steps" => self.steps = parse_list(value, |s| s.parse().ok()).ok_or_else(|| bad("list"))?,
            "fixed_steps" => self.fixed_steps = value.parse().map_err(|_| bad("integer"))?,
            "elements" => self.elements = parse_list(value, |s| s.parse().ok()).ok_or_else(|| bad("list"))?,
            "degree" | "p" => self.degree = value.parse().map_err(|_| bad("integer"))?,
            "mode_list" => self.mode_list = parse_list(value, |s| s.parse().ok()).ok_or_else(|| bad("list"))?,
            "dt_list" => self.dt_list = parse_list(value, parse_real).ok_or_else(|| bad("list"))?,
            "k_ref" => self.k_ref = value.parse().map_err(|_| bad("integer"))?,
            "reference" => {
                self.reference = match value {
                    "uhat" => Reference::Uhat,
                    "cn" => Reference::CnSpectral,
                    _ => return Err(bad("reference (uhat|cn)")),
                }
            }
            "samples" => self.samples = value.parse().map_err(|_| bad("integer"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("integer"))?,
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line of `text`; `#` starts a comment.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return err(format!("horizon must be positive (got {})", self.horizon));
        }
        if self.degree != 2 && self.degree != 3 {
            return err(format!("degree must be 2 or 3 (got {})", self.degree));
        }
        match self.study {
            StudyKind::TimeRate => {
                check_dyadic("steps", &self.steps.iter().map(|&s| s as f64).collect::<Vec<_>>())?;
                check_modes(self.modes)?;
            }
            StudyKind::SpaceRate => {
                check_dyadic("elements", &self.elements.iter().map(|&s| s as f64).collect::<Vec<_>>())?;
                check_modes(self.modes)?;
            }
            StudyKind::ModelErrorModes => {
                check_dyadic("mode_list", &self.mode_list.iter().map(|&s| s as f64).collect::<Vec<_>>())?;
                if self.k_ref != 0 && self.k_ref <= *self.mode_list.last().unwrap_or(&0) {
                    return err("k_ref must exceed every entry of mode_list".into());
                }
            }
            StudyKind::ModelErrorDt => {
                let inv: Vec<f64> = self.dt_list.iter().map(|d| 1.0 / d).collect();
                check_dyadic("dt_list", &inv)?;
            }
            StudyKind::DeterministicRates => {
                check_dyadic("steps", &self.steps.iter().map(|&s| s as f64).collect::<Vec<_>>())?;
                check_dyadic("elements", &self.elements.iter().map(|&s| s as f64).collect::<Vec<_>>())?;
            }
            StudyKind::SamplePath => {
                check_modes(self.modes)?;
                if self.elements.is_empty() {
                    return err("elements must name a mesh".into());
                }
            }
            StudyKind::Selftest => {}
        }
        if self.samples == 1 {
            return err("samples must be 0 (exact) or at least 2".into());
        }
        Ok(())
    }
}

fn check_modes(modes: usize) -> Result<()> {
    if modes == 0 {
        return Err(Error::Config("modes must be at least 1".into()));
    }
    Ok(())
}

/// Rate studies need at least 4 levels, each twice the previous.
fn check_dyadic(name: &str, v: &[f64]) -> Result<()> {
    if v.len() < 4 {
        return Err(Error::Config(format!("{name} needs at least 4 levels (got {})", v.len())));
    }
    if v.windows(2).any(|w| ((w[1] / w[0]) - 2.0).abs() > 1e-12) {
        return Err(Error::Config(format!("{name} must be dyadic and increasing")));
    }
    Ok(())
}

/// Reals as decimals or powers like `2^-12`.
fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some((b, e)) = s.split_once('^') {
        let b: f64 = b.trim().parse().ok()?;
        let e: i32 = e.trim().parse().ok()?;
        return Some(b.powi(e));
    }
    s.parse().ok()
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    s.split(',').map(|x| f(x.trim())).collect()
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub study: String,
    pub parameter_kind: String,
    pub parameter_value: f64,
    pub error: f64,
    pub stderr_or_tail: f64,
    pub seed: u64,
}

/// Fitted rate with its acceptance band, if one is declared.
#[derive(Debug, Clone)]
pub struct BandCheck {
    pub name: String,
    pub report: Option<RateReport>,
    pub band: Option<(f64, f64)>,
    /// Failure reason when no rate could be fitted.
    pub note: Option<String>,
}

impl BandCheck {
    pub fn passed(&self) -> bool {
        match (&self.report, self.band) {
            (Some(r), Some((lo, hi))) => r.within(lo, hi, MIN_R2),
            (Some(_), None) => true,
            (None, _) => false,
        }
    }
}

/// Outcome of a self-test check.
#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub discrepancy: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.discrepancy <= self.tolerance
    }
}

#[derive(Debug, Clone, Default)]
pub struct StudyOutcome {
    pub rows: Vec<ResultRow>,
    pub rates: Vec<BandCheck>,
    pub checks: Vec<Check>,
    /// `(solution, x, t, value)` samples of the sample-path study.
    pub path_samples: Vec<(&'static str, f64, f64, f64)>,
}

impl StudyOutcome {
    pub fn passed(&self) -> bool {
        self.rates.iter().all(BandCheck::passed) && self.checks.iter().all(Check::passed)
    }
}

fn row(cfg: &StudyConfig, name: &str, kind: ParameterKind, p: f64, e: f64, s: f64) -> ResultRow {
    ResultRow {
        study: name.to_string(),
        parameter_kind: kind.label().to_string(),
        parameter_value: p,
        error: e,
        stderr_or_tail: s,
        seed: cfg.seed,
    }
}

fn fit(name: &str, curve: Result<ErrorCurve>, band: Option<(f64, f64)>) -> BandCheck {
    match curve.and_then(|c| rate_regression(&c.sqrt_errors())) {
        Ok(r) => BandCheck {
            name: name.into(),
            report: Some(r),
            band,
            note: None,
        },
        Err(e) => BandCheck {
            name: name.into(),
            report: None,
            band,
            note: Some(e.to_string()),
        },
    }
}

/// Runs the configured study without touching the filesystem.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    match cfg.study {
        StudyKind::TimeRate => time_rate(cfg),
        StudyKind::SpaceRate => space_rate(cfg),
        StudyKind::ModelErrorModes => model_error_modes(cfg),
        StudyKind::ModelErrorDt => model_error_dt(cfg),
        StudyKind::DeterministicRates => deterministic_rates(cfg),
        StudyKind::SamplePath => sample_path(cfg),
        StudyKind::Selftest => selftest(cfg),
    }
}

fn time_rate(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::default();
    let mut points = Vec::new();
    for &m in &cfg.steps {
        let scheme = SchemeConfig::new(cfg.horizon, m)?;
        let (e, se) = if cfg.samples == 0 {
            (strong_error_exact_time(cfg.modes, cfg.dt, &scheme)?, 0.0)
        } else {
            let setup = McSetup::Time {
                m_star: cfg.modes,
                dt: cfg.dt,
                cfg: scheme,
            };
            mc_strong_error(&setup, cfg.samples, cfg.seed)?
        };
        out.rows.push(row(cfg, "time-rate", ParameterKind::TimeStep, scheme.dtau(), e, se));
        points.push((scheme.dtau(), e));
    }
    let curve = ErrorCurve::new(ParameterKind::TimeStep, points);
    out.rates.push(fit("time-rate", curve, Some((0.325, 0.425))));
    Ok(out)
}

fn space_band(p: usize) -> (f64, f64) {
    if p == 3 {
        (1.3, 1.7)
    } else {
        (0.85, 1.15)
    }
}

fn space_rate(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::default();
    let scheme = SchemeConfig::new(cfg.horizon, cfg.fixed_steps)?;
    let mut points = Vec::new();
    for &n in &cfg.elements {
        let system = FemSystem::new(FemSpace::uniform(n, cfg.degree)?)?;
        let h = system.space().h();
        let (e, se) = if cfg.samples == 0 {
            (strong_error_exact_full(&system, cfg.modes, cfg.dt, &scheme, cfg.reference)?, 0.0)
        } else {
            let setup = McSetup::Full {
                system: &system,
                m_star: cfg.modes,
                dt: cfg.dt,
                cfg: scheme,
                reference: cfg.reference,
            };
            mc_strong_error(&setup, cfg.samples, cfg.seed)?
        };
        out.rows.push(row(cfg, "space-rate", ParameterKind::MeshSize, h, e, se));
        points.push((h, e));
    }
    let curve = ErrorCurve::new(ParameterKind::MeshSize, points);
    out.rates.push(fit(&format!("space-rate p={}", cfg.degree), curve, Some(space_band(cfg.degree))));
    Ok(out)
}

fn model_error_modes(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::default();
    let k_ref = if cfg.k_ref == 0 {
        mode_cut_for_tail(1e-12).max(cfg.mode_list.iter().max().copied().unwrap_or(0) + 1)
    } else {
        cfg.k_ref
    };
    let mut points = Vec::new();
    for &m in &cfg.mode_list {
        let me = model_error_exact(m, cfg.dt, cfg.horizon, k_ref)?;
        let e = me.value + me.tail;
        out.rows.push(row(cfg, "model-error-modes", ParameterKind::InverseModes, 1.0 / m as f64, e, me.tail));
        points.push((1.0 / m as f64, e));
    }
    let curve = ErrorCurve::new(ParameterKind::InverseModes, points);
    out.rates.push(fit("model-error-modes", curve, Some((1.35, 1.65))));
    Ok(out)
}

fn model_error_dt(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::default();
    let k_ref = mode_cut_for_tail(1e-12);
    let mut points = Vec::new();
    for &dt in &cfg.dt_list {
        // every mode is kept, so only the time averaging contributes
        let me = model_error_exact(k_ref, dt, cfg.horizon, k_ref + 1)?;
        let e = me.value + me.tail;
        out.rows.push(row(cfg, "model-error-dt", ParameterKind::NoiseStep, dt, e, me.tail));
        points.push((dt, e));
    }
    let curve = ErrorCurve::new(ParameterKind::NoiseStep, points);
    out.rates.push(fit("model-error-dt", curve, Some((0.325, 0.425))));
    Ok(out)
}

fn deterministic_rates(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::default();
    let w0 = SpectralField::unit(1, 1)?;
    let time = Refinement::Time {
        steps: cfg.steps.clone(),
    };
    let space = Refinement::Space {
        elements: cfg.elements.clone(),
        degree: cfg.degree,
        steps: cfg.fixed_steps,
    };
    let p41_band = Some((0.9, 1.1));
    let p51_band = (cfg.degree == 3).then_some((2.7, 3.3));
    let studies = [
        ("prop-time-averaged", DeterministicProp::TimeAveraged, &time, p41_band),
        ("prop-time-nodal", DeterministicProp::TimeNodal, &time, None),
        ("prop-fem-averaged", DeterministicProp::FemAveraged, &space, p51_band),
        ("prop-fem-nodal", DeterministicProp::FemNodal, &space, None),
    ];
    for (name, prop, grid, band) in studies {
        let curve = deterministic_curve(prop, &w0, cfg.horizon, grid);
        if let Ok(c) = &curve {
            for &(p, e) in c.points() {
                out.rows.push(row(cfg, name, c.kind(), p, e, 0.0));
            }
        }
        out.rates.push(fit(name, curve, band));
    }
    Ok(out)
}

fn sample_path(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let mut out = StudyOutcome::default();
    let intervals = crate::experiments::noise_intervals(cfg.horizon, cfg.dt)?;
    let path = sample_noise(cfg.modes, intervals, cfg.horizon, cfg.seed)?;
    let system = FemSystem::new(FemSpace::uniform(cfg.elements[0], cfg.degree)?)?;
    let scheme = SchemeConfig::new(cfg.horizon, cfg.fixed_steps)?;
    let uh = cn_fem_stochastic(&system, &path, &scheme)?;
    let uhat = exact_uhat(&path);
    let xs: Vec<f64> = (0..=64).map(|j| j as f64 / 64.0).collect();
    for (n, u) in uhat.iter().enumerate() {
        let t = n as f64 * path.dt();
        for &x in &xs {
            out.path_samples.push(("uhat", x, t, u.eval(x)));
        }
    }
    for (m, v) in uh.iter().enumerate() {
        let t = m as f64 * scheme.dtau();
        for &x in &xs {
            out.path_samples.push(("fem", x, t, system.space().eval(v.as_slice(), x)));
        }
    }
    Ok(out)
}

fn selftest(cfg: &StudyConfig) -> Result<StudyOutcome> {
    use rand::{Rng, SeedableRng};
    let mut out = StudyOutcome::default();
    let samples = cfg.samples.max(2);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);

    // interval-average identity
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let modes = rng.random_range(1..=8);
        let n = rng.random_range(1..=8);
        let path = sample_noise_indexed(modes, n, 1.0, cfg.seed, k)?;
        let g_modes = rng.random_range(1..=8);
        let vals: Vec<f64> = (0..g_modes * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = ModeIntervalMatrix::from_fn(g_modes, n, |i, j| vals[(i - 1) * n + j - 1]);
        let (a, b) = ito_vs_inner_identity(&path, &g)?;
        worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1e-300));
    }
    out.checks.push(Check {
        name: "interval-average identity (relative)".into(),
        discrepancy: worst,
        tolerance: 1e-12,
    });

    // energy identity of the deterministic fully discrete scheme
    let w0 = SpectralField::new((1..=6).map(|k| 1.0 / (k * k) as f64).collect())?;
    let mut worst: f64 = 0.0;
    for p in [2, 3] {
        let system = FemSystem::new(FemSpace::uniform(16, p)?)?;
        let scheme = SchemeConfig::new(0.5, 32)?;
        let w = cn_fem_deterministic(&system, &w0, &scheme)?;
        for m in 2..=scheme.steps {
            let d: Vec<f64> = w[m].0.iter().zip(&w[m - 1].0).map(|(a, b)| a - b).collect();
            let jump = system.l2_norm_sq(&d);
            let (a, b) = (system.h2_seminorm_sq(&w[m].0), system.h2_seminorm_sq(&w[m - 1].0));
            let resid = jump + 0.5 * scheme.dtau() * (a - b);
            worst = worst.max(resid.abs() / (jump + 0.5 * scheme.dtau() * (a + b)));
        }
    }
    out.checks.push(Check {
        name: "energy identity (relative)".into(),
        discrepancy: worst,
        tolerance: 1e-10,
    });

    // exact strong errors against Monte Carlo, in standard errors
    let scheme = SchemeConfig::new(1.0, 8)?;
    let exact = strong_error_exact_time(8, 1.0 / 64.0, &scheme)?;
    let (mc, se) = mc_strong_error(
        &McSetup::Time {
            m_star: 8,
            dt: 1.0 / 64.0,
            cfg: scheme,
        },
        samples,
        cfg.seed,
    )?;
    out.checks.push(Check {
        name: "time error exact vs Monte Carlo (standard errors)".into(),
        discrepancy: (mc - exact).abs() / se,
        tolerance: 3.0,
    });
    let system = FemSystem::new(FemSpace::uniform(4, 3)?)?;
    let scheme = SchemeConfig::new(1.0, 2)?;
    let exact = strong_error_exact_full(&system, 2, 0.5, &scheme, Reference::Uhat)?;
    let (mc, se) = mc_strong_error(
        &McSetup::Full {
            system: &system,
            m_star: 2,
            dt: 0.5,
            cfg: scheme,
            reference: Reference::Uhat,
        },
        samples,
        cfg.seed,
    )?;
    out.checks.push(Check {
        name: "full error exact vs Monte Carlo (standard errors)".into(),
        discrepancy: (mc - exact).abs() / se,
        tolerance: 3.0,
    });

    // Itô isometry for a fixed simple integrand
    let coeffs = ModeIntervalMatrix::from_fn(4, 8, |i, n| ((i * n) as f64).sin());
    let expected: f64 = coeffs.as_slice().iter().map(|c| c * c).sum::<f64>() / 8.0;
    let (m, se) = crate::experiments::monte_carlo(samples, |k| {
        let path = sample_noise_indexed(4, 8, 1.0, cfg.seed, k)?;
        Ok(simple_integral(&path, &coeffs).powi(2))
    })?;
    out.checks.push(Check {
        name: "Ito isometry (standard errors)".into(),
        discrepancy: (m - expected).abs() / se,
        tolerance: 4.0,
    });

    for c in &out.checks {
        out.rows.push(ResultRow {
            study: "selftest".into(),
            parameter_kind: c.name.clone(),
            parameter_value: 0.0,
            error: c.discrepancy,
            stderr_or_tail: c.tolerance,
            seed: cfg.seed,
        });
    }
    Ok(out)
}

/// `results.csv` contents.
pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from("study,parameter_kind,parameter_value,error,stderr_or_tail,seed\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e},{:e},{}",
            r.study, r.parameter_kind, r.parameter_value, r.error, r.stderr_or_tail, r.seed
        );
    }
    s
}

/// `summary.txt` contents.
pub fn summary_text(cfg: &StudyConfig, outcome: &StudyOutcome) -> String {
    let mut s = format!("study: {}\nseed: {}\n", cfg.study, cfg.seed);
    for b in &outcome.rates {
        let verdict = if b.passed() { "PASS" } else { "FAIL" };
        match (&b.report, b.band) {
            (Some(r), Some((lo, hi))) => {
                let _ = writeln!(
                    s,
                    "{}: slope {:.4} R2 {:.4} band [{lo}, {hi}] R2 >= {MIN_R2} {verdict}",
                    b.name, r.slope, r.r_squared
                );
            }
            (Some(r), None) => {
                let _ = writeln!(s, "{}: slope {:.4} R2 {:.4} (no band)", b.name, r.slope, r.r_squared);
            }
            (None, _) => {
                let _ = writeln!(s, "{}: {} {verdict}", b.name, b.note.as_deref().unwrap_or("no fit"));
            }
        }
    }
    for c in &outcome.checks {
        let verdict = if c.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(s, "{}: {:.3e} <= {:.3e} {verdict}", c.name, c.discrepancy, c.tolerance);
    }
    let _ = writeln!(s, "overall: {}", if outcome.passed() { "PASS" } else { "FAIL" });
    s
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Writes the study outputs into `cfg.out`.
pub fn write_outputs(cfg: &StudyConfig, outcome: &StudyOutcome) -> Result<()> {
    fs::create_dir_all(&cfg.out)?;
    if cfg.study == StudyKind::SamplePath {
        let mut s = String::from("solution,x,t,value\n");
        for (name, x, t, v) in &outcome.path_samples {
            let _ = writeln!(s, "{name},{x:e},{t:e},{v:e}");
        }
        write_atomic(&cfg.out.join("sample_path.csv"), &s)?;
    } else {
        write_atomic(&cfg.out.join("results.csv"), &results_csv(&outcome.rows))?;
    }
    write_atomic(&cfg.out.join("summary.txt"), &summary_text(cfg, outcome))
}

/// Runs a study and writes its outputs; returns whether every band held.
pub fn run(cfg: &StudyConfig) -> Result<bool> {
    let outcome = run_study(cfg)?;
    write_outputs(cfg, &outcome)?;
    Ok(outcome.passed())
}

#[derive(Debug, Parser)]
#[command(name = "cnfem", about = "Convergence studies for the Crank-Nicolson finite element scheme")]
pub struct Args {
    /// time-rate | space-rate | model-error-modes | model-error-dt | deterministic-rates | sample-path | selftest
    #[arg(long)]
    pub study: Option<String>,
    /// key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo samples; 0 evaluates errors exactly
    #[arg(long)]
    pub samples: Option<usize>,
    /// Output directory (default from CNFEM_OUT_DIR, else ./cnfem-out)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
}

/// Resolves defaults, config file and flags into a study configuration.
pub fn resolve_config(args: &Args) -> Result<StudyConfig> {
    let text = match &args.config {
        Some(p) => Some(fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let from_file = text.as_deref().and_then(|t| {
        t.lines()
            .filter_map(|l| l.split('#').next())
            .filter_map(|l| l.split_once('='))
            .find(|(k, _)| k.trim() == "study")
            .map(|(_, v)| v.trim().to_string())
    });
    let name = args
        .study
        .clone()
        .or(from_file)
        .ok_or_else(|| Error::Config("no study given (use --study)".into()))?;
    let mut cfg = StudyConfig::defaults(name.parse()?);
    if let Some(t) = &text {
        cfg.apply_kv(t)?;
        cfg.study = name.parse()?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.samples {
        cfg.samples = n;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Entry point; returns the process exit status.
///
/// `0` when every band holds, `1` when a fitted rate misses its band, `2` on
/// invalid configuration or I/O failure.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = resolve_config(&args).and_then(|cfg| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.threads.unwrap_or(0))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        let passed = pool.install(|| run(&cfg))?;
        print!("{}", fs::read_to_string(cfg.out.join("summary.txt"))?);
        Ok(passed)
    });
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("cnfem: {e}");
            2
        }
    }
}
