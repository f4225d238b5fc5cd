//! Smooth symmetric test kernels vanishing on the boundary of the square.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::grid::SymmetricKernel;
use super::ops::PdeContext;

/// Mode pairs `(n₁, n₂)`, `n₁ ≤ n₂`, in a fixed order of increasing frequency.
pub const MODES: [(u32, u32); 15] = [
    (1, 1),
    (1, 2),
    (2, 2),
    (1, 3),
    (2, 3),
    (1, 4),
    (3, 3),
    (2, 4),
    (3, 4),
    (1, 5),
    (2, 5),
    (4, 4),
    (3, 5),
    (1, 6),
    (4, 5),
];

fn sine(n: u32, x: f64) -> f64 {
    (n as f64 * std::f64::consts::PI * (x + 1.0) / 2.0).sin()
}

/// `ψ_{n₁n₂}(x, y) = (e_{n₁}(x) e_{n₂}(y) + e_{n₂}(x) e_{n₁}(y)) / 2`.
pub fn mode(m: usize, (n1, n2): (u32, u32)) -> SymmetricKernel {
    SymmetricKernel::from_fn(m, |x, y| 0.5 * (sine(n1, x) * sine(n2, y) + sine(n2, x) * sine(n1, y)))
}

/// First `p` modes of [`MODES`].
pub fn basis(m: usize, p: usize) -> Vec<SymmetricKernel> {
    assert!(p <= MODES.len(), "at most {} modes are available", MODES.len());
    MODES[..p].iter().map(|&nm| mode(m, nm)).collect()
}

/// A bias kernel together with its norms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiasSpec {
    pub h: SymmetricKernel,
    pub coefficients: Vec<f64>,
    pub sup: f64,
    pub sup_d1: f64,
}

impl BiasSpec {
    pub fn from_kernel(ctx: &PdeContext, h: SymmetricKernel) -> Self {
        let sup = h.max_abs();
        let sup_d1 = ctx.sup_d1(&h);
        Self { h, coefficients: Vec::new(), sup, sup_d1 }
    }

    /// `max(‖h‖∞, ‖∂₁h‖∞)`.
    pub fn size(&self) -> f64 {
        self.sup.max(self.sup_d1)
    }

    /// Linear combination of the first `coeffs.len()` modes.
    pub fn from_modes(ctx: &PdeContext, coeffs: &[f64]) -> Self {
        let mut h = ctx.zeros();
        for (c, b) in coeffs.iter().zip(basis(ctx.m(), coeffs.len())) {
            h = h.add(&b.scale(*c));
        }
        let mut spec = Self::from_kernel(ctx, h);
        spec.coefficients = coeffs.to_vec();
        spec
    }

    /// Rescales so that `max(‖h‖∞, ‖∂₁h‖∞) = target`.
    pub fn rescaled(&self, ctx: &PdeContext, target: f64) -> Self {
        let s = if self.size() > 0.0 { target / self.size() } else { 0.0 };
        let mut out = Self::from_kernel(ctx, self.h.scale(s));
        out.coefficients = self.coefficients.iter().map(|c| c * s).collect();
        out
    }

    /// Random element of `{max(‖h‖∞, ‖∂₁h‖∞) ≤ ε}` built from `p` modes
    /// with Gaussian coefficients and a uniform radius in `[ε/2, ε]`.
    pub fn random<R: Rng + ?Sized>(ctx: &PdeContext, p: usize, eps: f64, rng: &mut R) -> Self {
        let coeffs: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let radius = eps * rng.random_range(0.5..=1.0);
        Self::from_modes(ctx, &coeffs).rescaled(ctx, radius)
    }

    /// Bias with the shape of the stationary kernel, normalised to size `eps`.
    pub fn k0_shaped(ctx: &PdeContext, eps: f64) -> Self {
        let h = SymmetricKernel::from_fn(ctx.m(), |x, y| -(1.0 + x) * (1.0 - y));
        Self::from_kernel(ctx, h).rescaled(ctx, eps)
    }
}
