//! Symmetric band matrices and their Cholesky factorization.

use crate::error::{Error, Result};

/// Symmetric matrix with half-bandwidth `bw`, storing the lower band row by
/// row: `data[i * (bw + 1) + k] = A[i][i - k]` for `k = 0..=bw`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymMatrix {
    dim: usize,
    bw: usize,
    data: Vec<f64>,
}

impl BandedSymMatrix {
    pub fn zeros(dim: usize, bw: usize) -> Self {
        Self {
            dim,
            bw,
            data: vec![0.0; dim * (bw + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bandwidth(&self) -> usize {
        self.bw
    }

    /// Entry `A[i][j]`; zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k > self.bw {
            0.0
        } else {
            self.data[hi * (self.bw + 1) + k]
        }
    }

    /// Adds `v` to `A[i][j]` (and implicitly `A[j][i]`).
    ///
    /// # Panics
    /// If `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (hi, lo) = if i >= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        assert!(k <= self.bw, "entry ({i},{j}) outside bandwidth {}", self.bw);
        self.data[hi * (self.bw + 1) + k] += v;
    }

    /// `a·self + b·other` for matrices of identical shape.
    pub fn lin_comb(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!((self.dim, self.bw), (other.dim, other.bw));
        Self {
            dim: self.dim,
            bw: self.bw,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        y.iter_mut().for_each(|v| *v = 0.0);
        let w = self.bw + 1;
        for i in 0..self.dim {
            let row = &self.data[i * w..(i + 1) * w];
            y[i] += row[0] * x[i];
            for k in 1..=self.bw.min(i) {
                let a = row[k];
                y[i] += a * x[i - k];
                y[i - k] += a * x[i];
            }
        }
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let w = self.bw + 1;
        let mut acc = 0.0;
        for i in 0..self.dim {
            let row = &self.data[i * w..(i + 1) * w];
            let mut off = 0.0;
            for k in 1..=self.bw.min(i) {
                off += row[k] * x[i - k];
            }
            acc += x[i] * (row[0] * x[i] + 2.0 * off);
        }
        acc
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Banded Cholesky `A = L Lᵀ`; `L` keeps the bandwidth of `A`.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let w = self.bw + 1;
        let mut l = self.data.clone();
        for i in 0..self.dim {
            let kmax = self.bw.min(i);
            // off-diagonal entries L[i][j], j = i-k, from left to right
            for k in (1..=kmax).rev() {
                let j = i - k;
                let mut s = l[i * w + k];
                // Σ_{m < j, within both bands} L[i][m] L[j][m]
                let reach = self.bw.min(j).min(self.bw - k);
                for q in 1..=reach {
                    s -= l[i * w + k + q] * l[j * w + q];
                }
                l[i * w + k] = s / l[j * w];
            }
            let mut d = l[i * w];
            for k in 1..=kmax {
                d -= l[i * w + k] * l[i * w + k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: i, value: d });
            }
            l[i * w] = d.sqrt();
        }
        Ok(BandedCholesky {
            dim: self.dim,
            bw: self.bw,
            l,
        })
    }
}

/// Lower-triangular banded Cholesky factor; immutable and shareable across
/// concurrent solves.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    dim: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        let w = self.bw + 1;
        // L y = b
        for i in 0..self.dim {
            let mut s = x[i];
            for k in 1..=self.bw.min(i) {
                s -= self.l[i * w + k] * x[i - k];
            }
            x[i] = s / self.l[i * w];
        }
        // Lᵀ x = y
        for i in (0..self.dim).rev() {
            let mut s = x[i];
            for k in 1..=self.bw.min(self.dim - 1 - i) {
                s -= self.l[(i + k) * w + k] * x[i + k];
            }
            x[i] = s / self.l[i * w];
        }
    }
}
