//! Gauss-Legendre rules and closed-form sine moments on `[0,1]`.

use std::f64::consts::PI;

/// Gauss-Legendre rule with `n` points mapped to `[0,1]`.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Newton on P_n from the Chebyshev-like initial guess
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            points[i] = 0.5 * (1.0 - z);
            points[n - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { points, weights }
    }

    /// `∫_a^b f` by this rule on `subdivisions` equal pieces.
    pub fn integrate(&self, a: f64, b: f64, subdivisions: usize, f: impl Fn(f64) -> f64) -> f64 {
        let m = subdivisions.max(1);
        let h = (b - a) / m as f64;
        let mut acc = 0.0;
        for s in 0..m {
            let lo = a + s as f64 * h;
            let part: f64 = self
                .points
                .iter()
                .zip(&self.weights)
                .map(|(&x, &w)| w * f(lo + h * x))
                .sum();
            acc += h * part;
        }
        acc
    }
}

/// `(P_n(z), P_n'(z))`.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Moments `C_j = ∫_0^1 ξ^j cos(θξ) dξ` and `S_j = ∫_0^1 ξ^j sin(θξ) dξ`
/// for `j = 0..=3`.
///
/// Small `θ` uses the power series; otherwise the integration-by-parts
/// recurrences `C_j = (sin θ - j S_{j-1})/θ`, `S_j = (j C_{j-1} - cos θ)/θ`.
pub fn trig_moments(theta: f64) -> ([f64; 4], [f64; 4]) {
    let mut c = [0.0; 4];
    let mut s = [0.0; 4];
    if theta.abs() < 2.0 {
        for j in 0..4 {
            let mut cs = 0.0;
            let mut ss = 0.0;
            // term_k = (-1)^k θ^{2k}/(2k)!
            let mut term = 1.0;
            for k in 0..30 {
                let kk = 2 * k;
                cs += term / (j + kk + 1) as f64;
                let sterm = term * theta / (kk + 1) as f64;
                ss += sterm / (j + kk + 2) as f64;
                term *= -theta * theta / ((kk + 1) * (kk + 2)) as f64;
                if term.abs() < 1e-20 {
                    break;
                }
            }
            c[j] = cs;
            s[j] = ss;
        }
    } else {
        let (sn, cn) = theta.sin_cos();
        c[0] = sn / theta;
        s[0] = (1.0 - cn) / theta;
        for j in 1..4 {
            let jf = j as f64;
            c[j] = (sn - jf * s[j - 1]) / theta;
            s[j] = (jf * c[j - 1] - cn) / theta;
        }
    }
    (c, s)
}
