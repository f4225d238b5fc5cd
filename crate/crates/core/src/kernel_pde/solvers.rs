//! Elliptic solves and fixed-point iterations for correlation kernels.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::basis::{basis, MODES};
use super::grid::SymmetricKernel;
use super::ops::{weighted_stiffness, PdeContext};
use crate::error::{LabError, Result};

/// Poincaré constant of the triangle with the mixed boundary conditions.
pub const ALPHA: f64 = std::f64::consts::PI * std::f64::consts::PI / 4.0;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FixedPointOptions {
    /// Stop once `‖∇(u_{n+1} - u_n)‖ ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Consecutive growing increments that count as divergence.
    pub divergence_window: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 200, divergence_window: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixedPointSolution {
    pub kernel: SymmetricKernel,
    pub iterations: usize,
    /// `‖∇(u_{n+1} - u_n)‖` per iteration.
    pub increments: Vec<f64>,
}

impl FixedPointSolution {
    /// Geometric mean ratio of successive increments over the last few steps.
    pub fn observed_rate(&self) -> f64 {
        let inc: Vec<f64> = self.increments.iter().copied().filter(|&v| v > 1e-13).collect();
        if inc.len() < 3 {
            return 0.0;
        }
        let tail = &inc[inc.len().saturating_sub(6)..];
        let steps = (tail.len() - 1) as f64;
        (tail[tail.len() - 1] / tail[0]).powf(1.0 / steps)
    }
}

fn iterate(
    ctx: &PdeContext,
    start: SymmetricKernel,
    opts: &FixedPointOptions,
    mut step: impl FnMut(&SymmetricKernel) -> Result<SymmetricKernel>,
) -> Result<FixedPointSolution> {
    let mut u = start;
    let mut increments = Vec::new();
    let mut growing = 0;
    for it in 1..=opts.max_iter {
        let next = step(&u)?;
        let inc = ctx.grad_norm(&next.sub(&u));
        if !inc.is_finite() {
            return Err(LabError::Divergence { iterations: it, last_increment: inc });
        }
        if let Some(&prev) = increments.last() {
            growing = if inc > prev { growing + 1 } else { 0 };
        }
        increments.push(inc);
        u = next;
        if inc <= opts.tol {
            return Ok(FixedPointSolution { kernel: u, iterations: it, increments });
        }
        if growing >= opts.divergence_window {
            return Err(LabError::Divergence { iterations: it, last_increment: inc });
        }
    }
    Err(LabError::NoConvergence {
        iterations: opts.max_iter,
        last_increment: *increments.last().unwrap_or(&f64::NAN),
    })
}

/// Solves `Δu = rhs` off the diagonal with `(∂₂ - ∂₁)u(x⁺, x) = jump(x)` on it
/// and `u = 0` on the rest of the boundary. `jump` is indexed by diagonal node.
pub fn laplacian_solve(ctx: &PdeContext, rhs: &SymmetricKernel, jump: &[f64]) -> SymmetricKernel {
    let g = &ctx.grid;
    let d = ctx.delta();
    let b: Vec<f64> = g
        .nodes
        .iter()
        .map(|&(a, c)| {
            let mut v = -0.5 * g.node_weight(a, c) * rhs.get(a, c);
            if a == c {
                v += d * jump[a];
            }
            v
        })
        .collect();
    ctx.solve_stiffness(&b)
}

/// Euler-Lagrange equation for the correlation kernel `k_h` of the measure
/// tilted by `h`, solved as a fixed point for `k - k₀`.
pub fn solve_euler_lagrange(
    ctx: &PdeContext,
    h: &SymmetricKernel,
    opts: &FixedPointOptions,
) -> Result<FixedPointSolution> {
    let k0 = ctx.k0();
    let mut sol = iterate(ctx, ctx.zeros(), opts, |u| {
        let r = ctx.q_gradient(&k0.add(u), h);
        Ok(ctx.solve_stiffness(&r))
    })?;
    sol.kernel = k0.add(&sol.kernel);
    Ok(sol)
}

/// Linear part of the Euler-Lagrange map, `δ ↦ S(u + δ) - S(u)`.
fn el_linear(ctx: &PdeContext, h: &SymmetricKernel, delta: &SymmetricKernel) -> SymmetricKernel {
    let r_full = ctx.q_gradient(delta, h);
    let r_zero = ctx.q_gradient(&ctx.zeros(), h);
    let r: Vec<f64> = r_full.iter().zip(&r_zero).map(|(p, q)| p - q).collect();
    ctx.solve_stiffness(&r)
}

fn ms_symmetric(ctx: &PdeContext, du: &DMatrix<f64>, dw: &DMatrix<f64>) -> DMatrix<f64> {
    ctx.m_staggered(du, dw) + ctx.m_staggered(dw, du)
}

/// Main kernel equation for the precision correction `g_h`, solved for
/// `v = σ̄(x)σ̄(y) g` by a fixed point on the quadratic term.
pub fn solve_main_equation(
    ctx: &PdeContext,
    h: &SymmetricKernel,
    opts: &FixedPointOptions,
) -> Result<FixedPointSolution> {
    let g = &ctx.grid;
    let m = ctx.m();
    let p = |x: f64, y: f64| ctx.params.sigma_bar_at(x) * ctx.params.sigma_bar_at(y);
    let s2 = -2.0 * ctx.rho_prime * ctx.rho_prime;
    let curv = |a: usize, b: usize| s2 * (1.0 / ctx.s_node[a] + 1.0 / ctx.s_node[b]);
    let mut op = weighted_stiffness(g, |_, _| 1.0);
    for (i, &(a, b)) in g.nodes.iter().enumerate() {
        op.add(i, i, 0.5 * g.node_weight(a, b) * curv(a, b));
    }
    let factor = op.cholesky()?;
    let k0 = ctx.k0();
    let base: Vec<f64> = ctx
        .stiffness_apply(&k0)
        .iter()
        .zip(ctx.weighted_apply(h, p))
        .map(|(a, b)| a + b)
        .collect();
    let pnode = SymmetricKernel::from_fn(m, p);
    let dh = ctx.d1(h);
    let mut sol = iterate(ctx, ctx.zeros(), opts, |v| {
        let gk = v.zip_with(&pnode, |a, b| a / b);
        let dg = ctx.d1(&gk);
        let dgh = &dg - &dh;
        let n = ms_symmetric(ctx, &dg, &dgh);
        let rhs: Vec<f64> = g
            .nodes
            .iter()
            .zip(&base)
            .map(|(&(a, b), &s)| s + 0.5 * g.node_weight(a, b) * pnode.get(a, b) * n[(a, b)])
            .collect();
        Ok(ctx.from_unknowns(&factor.solve(&rhs)))
    })?;
    sol.kernel = sol.kernel.zip_with(&pnode, |a, b| a / b);
    Ok(sol)
}

/// Result of the nonlinear Poisson problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonSolution {
    pub solution: FixedPointSolution,
    /// Weighted `L²` norm of the strong-form residual.
    pub residual: f64,
}

/// Solves `½Δf + ½(𝓜(∂₁f, ∂₁h) + 𝓜(∂₁h, ∂₁f)) = φ/‖φ‖` with the same
/// boundary conditions as the kernel equations.
pub fn solve_poisson(
    ctx: &PdeContext,
    h: &SymmetricKernel,
    phi: &SymmetricKernel,
    opts: &FixedPointOptions,
) -> Result<PoissonSolution> {
    let g = &ctx.grid;
    let norm = ctx.l2_norm(phi);
    if norm == 0.0 {
        return Err(LabError::InvalidArgument("source term vanishes".into()));
    }
    let phat = phi.scale(1.0 / norm);
    let dh = ctx.d1(h);
    let rhs_of = |f: &SymmetricKernel| -> Vec<f64> {
        let ms = ms_symmetric(ctx, &ctx.d1(f), &dh);
        g.nodes
            .iter()
            .map(|&(a, b)| g.node_weight(a, b) * (0.5 * ms[(a, b)] - phat.get(a, b)))
            .collect()
    };
    let solution = iterate(ctx, ctx.zeros(), opts, |f| Ok(ctx.solve_stiffness(&rhs_of(f))))?;
    let af = ctx.stiffness_apply(&solution.kernel);
    let r = rhs_of(&solution.kernel);
    let residual = g
        .nodes
        .iter()
        .zip(af.iter().zip(&r))
        .map(|(&(a, b), (p, q))| {
            let w = g.node_weight(a, b);
            let strong = 2.0 * (p - q) / w;
            w * strong * strong
        })
        .sum::<f64>()
        .sqrt();
    Ok(PoissonSolution { solution, residual })
}

/// Measured and predicted Lipschitz constants of a fixed-point map in the
/// energy norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    /// Largest ratio over random smooth directions.
    pub sampled: f64,
    /// Power-iteration estimate of the spectral radius.
    pub spectral: f64,
    pub bound: f64,
    pub poincare: f64,
}

impl ContractionReport {
    pub fn measured(&self) -> f64 {
        self.sampled.max(self.spectral)
    }
}

/// `α^{-1/2}(2α^{-1/2}‖d‖∞ + α^{-1/2}‖ξ‖₂/4 + ‖∇ψ‖₂/8)`.
pub fn contraction_bound(d_sup: f64, xi_l2: f64, grad_psi: f64) -> f64 {
    let ia = ALPHA.powf(-0.5);
    ia * (2.0 * ia * d_sup + ia * xi_l2 / 4.0 + grad_psi / 8.0)
}

fn measure_linear<R: Rng + ?Sized>(
    ctx: &PdeContext,
    map: impl Fn(&SymmetricKernel) -> SymmetricKernel,
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    let modes = basis(ctx.m(), MODES.len());
    let random_dir = |rng: &mut R| {
        let mut u = ctx.zeros();
        for b in &modes {
            let c: f64 = rng.sample(StandardNormal);
            u = u.add(&b.scale(c));
        }
        u
    };
    let mut sampled: f64 = 0.0;
    for _ in 0..samples {
        let u = random_dir(rng);
        sampled = sampled.max(ctx.grad_norm(&map(&u)) / ctx.grad_norm(&u));
    }
    let mut u = random_dir(rng);
    let mut spectral = 0.0;
    for _ in 0..60 {
        let n = ctx.grad_norm(&u);
        u = u.scale(1.0 / n);
        let next = map(&u);
        spectral = ctx.grad_norm(&next);
        if spectral == 0.0 {
            break;
        }
        u = next;
    }
    (sampled, spectral)
}

/// Lipschitz constant of the Euler-Lagrange map against its analytic bound.
pub fn el_contraction<R: Rng + ?Sized>(
    ctx: &PdeContext,
    h: &SymmetricKernel,
    samples: usize,
    rng: &mut R,
) -> ContractionReport {
    let jump = ctx.diag_jump(h);
    let d_sup = (1..ctx.m()).map(|a| (ctx.s_node[a] * jump[a]).abs()).fold(0.0, f64::max);
    let bound = contraction_bound(d_sup, ctx.xi_norm(h), 0.0);
    let (sampled, spectral) = measure_linear(ctx, |u| el_linear(ctx, h, u), samples, rng);
    ContractionReport { sampled, spectral, bound, poincare: ctx.poincare_constant() }
}

/// Lipschitz constant of the Poisson map against its analytic bound.
pub fn poisson_contraction<R: Rng + ?Sized>(
    ctx: &PdeContext,
    h: &SymmetricKernel,
    samples: usize,
    rng: &mut R,
) -> ContractionReport {
    let g = &ctx.grid;
    let dh = ctx.d1(h);
    let map = |f: &SymmetricKernel| {
        let ms = ms_symmetric(ctx, &ctx.d1(f), &dh);
        let r: Vec<f64> =
            g.nodes.iter().map(|&(a, b)| 0.5 * g.node_weight(a, b) * ms[(a, b)]).collect();
        ctx.solve_stiffness(&r)
    };
    let bound = contraction_bound(0.0, 0.0, ctx.grad_norm(h));
    let (sampled, spectral) = measure_linear(ctx, map, samples, rng);
    ContractionReport { sampled, spectral, bound, poincare: ctx.poincare_constant() }
}
