//! Correlation operators `C_k = σ̄ + k` and the covariance/precision map.

use nalgebra::{DMatrix, SymmetricEigen};

use super::grid::SymmetricKernel;
use crate::error::{LabError, Result};
use crate::lattice::Params;

/// Nyström discretisation of `(C_k φ)(x) = σ̄(x)φ(x) + ∫ k(x, y) φ(y) dy`
/// on the interior grid nodes.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    pub m: usize,
    pub matrix: DMatrix<f64>,
}

fn sigma_interior(params: &Params, m: usize) -> Vec<f64> {
    let d = 2.0 / m as f64;
    (1..m).map(|a| params.sigma_bar_at(-1.0 + a as f64 * d)).collect()
}

fn interior_block(k: &SymmetricKernel) -> DMatrix<f64> {
    let m = k.m;
    DMatrix::from_fn(m - 1, m - 1, |i, j| k.get(i + 1, j + 1))
}

fn from_interior(m: usize, block: &DMatrix<f64>) -> SymmetricKernel {
    let mut k = SymmetricKernel::zeros(m);
    for i in 0..m - 1 {
        for j in i..m - 1 {
            k.set(i + 1, j + 1, 0.5 * (block[(i, j)] + block[(j, i)]));
        }
    }
    k
}

impl KernelOperator {
    pub fn new(params: &Params, k: &SymmetricKernel) -> Self {
        let m = k.m;
        let d = k.delta();
        let s = sigma_interior(params, m);
        let mut matrix = interior_block(k) * d;
        for (i, si) in s.iter().enumerate() {
            matrix[(i, i)] += si;
        }
        Self { m, matrix }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let sym = 0.5 * (&self.matrix + self.matrix.transpose());
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        (&self.matrix * nalgebra::DVector::from_column_slice(phi)).iter().copied().collect()
    }
}

fn spd_inverse(mat: DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let sym = 0.5 * (&mat + mat.transpose());
    sym.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| LabError::Numerical(format!("{what} is not positive definite")))
}

/// `g = σ̄⁻¹ - C_k⁻¹` as a kernel.
pub fn g_from_k(params: &Params, k: &SymmetricKernel) -> Result<SymmetricKernel> {
    let m = k.m;
    let d = k.delta();
    let c = KernelOperator::new(params, k).matrix;
    let cinv = spd_inverse(c, "σ̄ + k")?;
    let s = sigma_interior(params, m);
    let mut g = -cinv;
    for (i, si) in s.iter().enumerate() {
        g[(i, i)] += 1.0 / si;
    }
    Ok(from_interior(m, &(g / d)))
}

/// `k = (σ̄⁻¹ - g)⁻¹ - σ̄` as a kernel.
pub fn k_from_g(params: &Params, g: &SymmetricKernel) -> Result<SymmetricKernel> {
    let m = g.m;
    let d = g.delta();
    let s = sigma_interior(params, m);
    let mut prec = -interior_block(g) * d;
    for (i, si) in s.iter().enumerate() {
        prec[(i, i)] += 1.0 / si;
    }
    let mut k = spd_inverse(prec, "σ̄⁻¹ - g")?;
    for (i, si) in s.iter().enumerate() {
        k[(i, i)] -= si;
    }
    Ok(from_interior(m, &(k / d)))
}

/// Largest eigenvalue of the integral operator with kernel `g`.
pub fn max_eigenvalue(g: &SymmetricKernel) -> f64 {
    let b = interior_block(g) * g.delta();
    let sym = 0.5 * (&b + b.transpose());
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
