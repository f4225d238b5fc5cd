//! The functional `J_h(k)` and its supremum over a finite span of biases.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::kernel_pde::{PdeContext, SymmetricKernel};

/// The four contributions to `J_h(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JhTerms {
    /// `-(1/8)⟨k, Δh + 𝓜(∂₁h, ∂₁h)⟩`
    pub bulk: f64,
    /// `(1/4)∫ tr(k) (∂₂-∂₁)h(x⁺, x) dx`
    pub trace: f64,
    /// `(ρ̄'²/4)∫ h(x, x) dx`
    pub diagonal: f64,
    /// `-(1/8)∫∫ σ̄σ̄ (∂₁h)²`
    pub mobility: f64,
}

impl JhTerms {
    pub fn total(&self) -> f64 {
        self.bulk + self.trace + self.diagonal + self.mobility
    }
}

/// `J_h(k)` by grid quadrature; the trace of `k` is its diagonal nodal value.
pub fn eval_jh(ctx: &PdeContext, k: &SymmetricKernel, h: &SymmetricKernel) -> JhTerms {
    let dh = ctx.d1(h);
    let lap = ctx.laplacian_with_jump(h);
    let mhh = ctx.m_staggered(&dh, &dh);
    let n = ctx.m() + 1;
    let mut inner = 0.0;
    for a in 0..n {
        for b in 0..n {
            inner += ctx.w[a] * ctx.w[b] * k.get(a, b) * (lap.get(a, b) + mhh[(a, b)]);
        }
    }
    let jump = ctx.diag_jump(h);
    let ones = vec![1.0; n];
    let mut mobility = 0.0;
    for a in 0..ctx.m() {
        for b in 0..n {
            mobility += ctx.delta() * ctx.s_mid[a] * ctx.w[b] * ctx.s_node[b] * dh[(a, b)].powi(2);
        }
    }
    JhTerms {
        bulk: -inner / 8.0,
        trace: ctx.diag_integral(k, &jump) / 4.0,
        diagonal: ctx.rho_prime.powi(2) / 4.0 * ctx.diag_integral(h, &ones),
        mobility: -mobility / 8.0,
    }
}

/// `(1/8)∫ σ̄ ⟨∂₁h, C_k ∂₁h⟩`.
pub fn quadratic_jh(ctx: &PdeContext, k: &SymmetricKernel, h: &SymmetricKernel) -> f64 {
    ctx.q_form(k, h, h) / 8.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub value: f64,
    /// Optimal coefficients in the given basis.
    pub coefficients: Vec<f64>,
    /// Decomposition of `J_{h*}(k)`.
    pub terms: JhTerms,
    /// Eigenvalue ratio of the normal matrix.
    pub condition: f64,
    /// `max(‖h*‖∞, ‖∂₁h*‖∞)`.
    pub optimizer_size: f64,
}

/// Maximises `J_h(k)` over `h = Σ c_m ψ_m`. With `E_m = E(k - k₀, ψ_m)` and
/// `Q_{mn} = Q_k(ψ_m, ψ_n)` the functional is `(cᵀE - cᵀQc)/8`.
pub fn rate_sup(ctx: &PdeContext, k: &SymmetricKernel, basis: &[SymmetricKernel]) -> Result<RateReport> {
    if basis.is_empty() {
        return Err(LabError::InvalidArgument("empty basis".into()));
    }
    let dk = k.sub(&ctx.k0());
    let e = DVector::from_iterator(basis.len(), basis.iter().map(|psi| ctx.energy(&dk, psi)));
    let q: DMatrix<f64> = ctx.q_matrix(k, basis);
    let eig = SymmetricEigen::new(q.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    let chol = q
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::Admissibility(format!("normal matrix not positive definite (λ_min = {lo:.3e})")))?;
    let c = chol.solve(&e) * 0.5;
    let value = c.dot(&(&q * &c)) / 8.0;
    let mut h = ctx.zeros();
    for (ci, psi) in c.iter().zip(basis) {
        h = h.add(&psi.scale(*ci));
    }
    Ok(RateReport {
        value,
        coefficients: c.iter().copied().collect(),
        terms: eval_jh(ctx, k, &h),
        condition: hi / lo,
        optimizer_size: h.max_abs().max(ctx.sup_d1(&h)),
    })
}
