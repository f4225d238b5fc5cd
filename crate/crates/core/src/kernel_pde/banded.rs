//! Banded symmetric positive definite factorisation.

use crate::error::{LabError, Result};

/// Lower band `L` of a Cholesky factor `A = L Lᵀ` with half-bandwidth `bw`.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    bw: usize,
    /// Row `i` holds `L[i][i-bw ..= i]`.
    band: Vec<f64>,
}

/// Symmetric banded matrix under assembly (lower band only).
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    pub n: usize,
    pub bw: usize,
    band: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, bw: usize) -> Self {
        Self { n, bw, band: vec![0.0; n * (bw + 1)] }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j <= i && i - j <= self.bw);
        i * (self.bw + 1) + (self.bw - (i - j))
    }

    /// Adds `v` to entry `(i, j)` (and implicitly `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        assert!(i - j <= self.bw, "entry ({i},{j}) outside the band");
        let s = self.slot(i, j);
        self.band[s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if i - j > self.bw {
            0.0
        } else {
            self.band[self.slot(i, j)]
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let j0 = i.saturating_sub(self.bw);
            for j in j0..=i {
                let v = self.band[self.slot(i, j)];
                y[i] += v * x[j];
                if j != i {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut l = self.band.clone();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            for j in j0..=i {
                let k0 = j0.max(j.saturating_sub(bw));
                let mut s = l[i * w + (bw - (i - j))];
                for k in k0..j {
                    s -= l[i * w + (bw - (i - k))] * l[j * w + (bw - (j - k))];
                }
                if i == j {
                    if s <= 0.0 {
                        return Err(LabError::Numerical(format!(
                            "matrix not positive definite at pivot {i} (value {s:.3e})"
                        )));
                    }
                    l[i * w + bw] = s.sqrt();
                } else {
                    l[i * w + (bw - (i - j))] = s / l[j * w + bw];
                }
            }
        }
        Ok(BandedCholesky { n, bw, band: l })
    }
}

impl BandedCholesky {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let (n, bw) = (self.n, self.bw);
        let w = bw + 1;
        let mut y = rhs.to_vec();
        for i in 0..n {
            let j0 = i.saturating_sub(bw);
            let mut s = y[i];
            for j in j0..i {
                s -= self.band[i * w + (bw - (i - j))] * y[j];
            }
            y[i] = s / self.band[i * w + bw];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            let j1 = (i + bw).min(n - 1);
            for j in (i + 1)..=j1 {
                s -= self.band[j * w + (bw - (j - i))] * y[j];
            }
            y[i] = s / self.band[i * w + bw];
        }
        y
    }
}
