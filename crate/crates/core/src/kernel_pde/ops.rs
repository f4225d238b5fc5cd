//! Discrete calculus for symmetric kernels on the triangle.
//!
//! Differences in the first variable live on the staggered points
//! `x_{a+1/2}`, so no difference straddles the diagonal.

use nalgebra::DMatrix;

use super::banded::{BandedCholesky, BandedMatrix};
use super::grid::{SymmetricKernel, TriangleGrid};
use crate::error::Result;
use crate::lattice::Params;

/// Grid, profile samples and the factorised Dirichlet-Neumann stiffness matrix.
#[derive(Debug, Clone)]
pub struct PdeContext {
    pub grid: TriangleGrid,
    pub params: Params,
    pub rho_prime: f64,
    /// `σ̄(x_a)`
    pub s_node: Vec<f64>,
    /// `σ̄(x_{a+1/2})`
    pub s_mid: Vec<f64>,
    /// Trapezoid weights.
    pub w: Vec<f64>,
    pub stiffness: BandedMatrix,
    pub factor: BandedCholesky,
}

impl PdeContext {
    pub fn new(params: &Params, m: usize) -> Result<Self> {
        let grid = TriangleGrid::new(m)?;
        let s_node = (0..=m).map(|a| params.sigma_bar_at(grid.x(a))).collect();
        let s_mid = (0..m).map(|a| params.sigma_bar_at(grid.x(a) + 0.5 * grid.delta)).collect();
        let w = grid.trapezoid();
        let stiffness = weighted_stiffness(&grid, |_, _| 1.0);
        let factor = stiffness.cholesky()?;
        Ok(Self {
            rho_prime: params.rho_prime(),
            params: *params,
            grid,
            s_node,
            s_mid,
            w,
            stiffness,
            factor,
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.grid.m
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        self.grid.delta
    }

    pub fn zeros(&self) -> SymmetricKernel {
        SymmetricKernel::zeros(self.m())
    }

    /// Stationary two-point kernel `-ρ̄'²(1+x∧y)(1-x∨y)/2`.
    pub fn k0(&self) -> SymmetricKernel {
        let r2 = self.rho_prime * self.rho_prime;
        SymmetricKernel::from_fn(self.m(), |x, y| -0.5 * r2 * (1.0 + x) * (1.0 - y))
    }

    /// Values at the unknown nodes.
    pub fn to_unknowns(&self, u: &SymmetricKernel) -> Vec<f64> {
        self.grid.nodes.iter().map(|&(a, b)| u.get(a, b)).collect()
    }

    /// Kernel with the given unknown values and zero boundary values.
    pub fn from_unknowns(&self, x: &[f64]) -> SymmetricKernel {
        let mut u = self.zeros();
        for (&(a, b), &v) in self.grid.nodes.iter().zip(x) {
            u.set(a, b, v);
        }
        u
    }

    /// `(A u)` at the unknown nodes, boundary values of `u` included.
    pub fn stiffness_apply(&self, u: &SymmetricKernel) -> Vec<f64> {
        self.weighted_apply(u, |_, _| 1.0)
    }

    /// Same as [`Self::stiffness_apply`] with edge weights `wt(x_mid, y_mid)`.
    pub fn weighted_apply(&self, u: &SymmetricKernel, wt: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; g.unknowns()];
        for (p, q) in g.edges() {
            let (xm, ym) = (0.5 * (g.x(p.0) + g.x(q.0)), 0.5 * (g.x(p.1) + g.x(q.1)));
            let du = wt(xm, ym) * (u.get(p.0, p.1) - u.get(q.0, q.1));
            if let Some(i) = g.index(p.0, p.1) {
                out[i] += du;
            }
            if let Some(j) = g.index(q.0, q.1) {
                out[j] -= du;
            }
        }
        out
    }

    /// Dirichlet energy on the full square, `∫∫ ∇u·∇φ`.
    pub fn energy(&self, u: &SymmetricKernel, phi: &SymmetricKernel) -> f64 {
        let mut e = 0.0;
        for (p, q) in self.grid.edges() {
            e += (u.get(p.0, p.1) - u.get(q.0, q.1)) * (phi.get(p.0, p.1) - phi.get(q.0, q.1));
        }
        2.0 * e
    }

    pub fn grad_norm(&self, u: &SymmetricKernel) -> f64 {
        self.energy(u, u).max(0.0).sqrt()
    }

    /// Trapezoid inner product on the full square.
    pub fn l2_inner(&self, u: &SymmetricKernel, v: &SymmetricKernel) -> f64 {
        let n = self.m() + 1;
        let mut s = 0.0;
        for a in 0..n {
            for b in 0..n {
                s += self.w[a] * self.w[b] * u.get(a, b) * v.get(a, b);
            }
        }
        s
    }

    pub fn l2_norm(&self, u: &SymmetricKernel) -> f64 {
        self.l2_inner(u, u).max(0.0).sqrt()
    }

    /// `D[a][b] = (u(x_{a+1}, x_b) - u(x_a, x_b)) / Δ`, an `M × (M+1)` array.
    pub fn d1(&self, u: &SymmetricKernel) -> DMatrix<f64> {
        let m = self.m();
        let d = self.delta();
        DMatrix::from_fn(m, m + 1, |a, b| (u.get(a + 1, b) - u.get(a, b)) / d)
    }

    /// Largest staggered first-variable difference quotient.
    pub fn sup_d1(&self, u: &SymmetricKernel) -> f64 {
        self.d1(u).amax()
    }

    /// `Σ_a Δ σ̄_{a+1/2} du[a][b] dw[a][c]`.
    pub fn m_staggered(&self, du: &DMatrix<f64>, dw: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.delta();
        let mut scaled = dw.clone();
        for (a, mut row) in scaled.row_iter_mut().enumerate() {
            row *= d * self.s_mid[a];
        }
        du.transpose() * scaled
    }

    /// `∫ u(z, x) σ̄(z) v(z, y) dz` by the trapezoid rule in `z`.
    pub fn bilinear_m(&self, u: &SymmetricKernel, v: &SymmetricKernel) -> DMatrix<f64> {
        let n = self.m() + 1;
        let um = DMatrix::from_row_slice(n, n, &u.values);
        let mut vm = DMatrix::from_row_slice(n, n, &v.values);
        for (a, mut row) in vm.row_iter_mut().enumerate() {
            row *= self.w[a] * self.s_node[a];
        }
        um.transpose() * vm
    }

    /// Staggered products feeding the quadratic form `Q_k(h, ·)`.
    fn q_weights(&self, k: &SymmetricKernel, dh: &DMatrix<f64>) -> DMatrix<f64> {
        let m = self.m();
        let n = m + 1;
        let d = self.delta();
        let mut kw = DMatrix::from_row_slice(n, n, &k.values);
        for (b, mut row) in kw.row_iter_mut().enumerate() {
            row *= self.w[b];
        }
        let t = dh * kw;
        DMatrix::from_fn(m, n, |a, c| {
            d * self.s_mid[a] * self.w[c] * (dh[(a, c)] * self.s_node[c] + t[(a, c)])
        })
    }

    /// `Q_k(h, φ) = ∫ σ̄ ⟨∂₁h, (σ̄ + k) ∂₁φ⟩`.
    pub fn q_form(&self, k: &SymmetricKernel, h: &SymmetricKernel, phi: &SymmetricKernel) -> f64 {
        let v = self.q_weights(k, &self.d1(h));
        v.component_mul(&self.d1(phi)).sum()
    }

    /// Gradient of `φ ↦ Q_k(h, φ)` with respect to the unknown node values.
    pub fn q_gradient(&self, k: &SymmetricKernel, h: &SymmetricKernel) -> Vec<f64> {
        let v = self.q_weights(k, &self.d1(h));
        self.adjoint_d1(&v)
    }

    /// Transpose of the map from unknowns to `Σ V ∘ D φ`.
    pub fn adjoint_d1(&self, v: &DMatrix<f64>) -> Vec<f64> {
        let m = self.m();
        let d = self.delta();
        let gfull = |i: usize, j: usize| {
            let up = if i >= 1 { v[(i - 1, j)] } else { 0.0 };
            let dn = if i < m { v[(i, j)] } else { 0.0 };
            (up - dn) / d
        };
        self.grid
            .nodes
            .iter()
            .map(|&(p, q)| if p == q { gfull(p, p) } else { gfull(p, q) + gfull(q, p) })
            .collect()
    }

    /// Quadratic form `Q_k` on a list of test kernels, as a Gram matrix.
    pub fn q_matrix(&self, k: &SymmetricKernel, basis: &[SymmetricKernel]) -> DMatrix<f64> {
        let ds: Vec<_> = basis.iter().map(|b| self.d1(b)).collect();
        let vs: Vec<_> = ds.iter().map(|d| self.q_weights(k, d)).collect();
        let p = basis.len();
        let mut q = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                q[(i, j)] = vs[i].component_mul(&ds[j]).sum();
            }
        }
        0.5 * (&q + q.transpose())
    }

    /// Jump `(∂₂ - ∂₁) u(x⁺, x)` of the normal derivative across the diagonal,
    /// indexed by diagonal node; zero at the two corners.
    pub fn diag_jump(&self, u: &SymmetricKernel) -> Vec<f64> {
        let m = self.m();
        let d = self.delta();
        let mut j = vec![0.0; m + 1];
        for a in 1..m {
            let d1 = if a >= 2 {
                (3.0 * u.get(a, a) - 4.0 * u.get(a - 1, a) + u.get(a - 2, a)) / (2.0 * d)
            } else {
                (u.get(a, a) - u.get(a - 1, a)) / d
            };
            let d2 = if a + 2 <= m {
                (-3.0 * u.get(a, a) + 4.0 * u.get(a, a + 1) - u.get(a, a + 2)) / (2.0 * d)
            } else {
                (u.get(a, a + 1) - u.get(a, a)) / d
            };
            j[a] = d1 - d2;
        }
        j
    }

    /// Laplacian off the diagonal plus the singular diagonal part folded in
    /// at diagonal nodes; zero on the boundary of the square.
    pub fn laplacian_with_jump(&self, u: &SymmetricKernel) -> SymmetricKernel {
        let m = self.m();
        let d2 = self.delta() * self.delta();
        let jump = self.diag_jump(u);
        let mut out = self.zeros();
        for &(a, b) in &self.grid.nodes {
            let v = if a == b {
                2.0 * (u.get(a - 1, a) + u.get(a, a + 1) - 2.0 * u.get(a, a)) / d2
                    + 2.0 * jump[a] / self.delta()
            } else {
                (u.get(a + 1, b) + u.get(a - 1, b) + u.get(a, b + 1) + u.get(a, b - 1)
                    - 4.0 * u.get(a, b))
                    / d2
            };
            out.set(a, b, v);
        }
        debug_assert!(out.boundary_max() == 0.0 && m >= 8);
        out
    }

    /// Five-point Laplacian at interior off-diagonal nodes (zero elsewhere).
    pub fn laplacian_interior(&self, u: &SymmetricKernel) -> SymmetricKernel {
        let d2 = self.delta() * self.delta();
        let mut out = self.zeros();
        for &(a, b) in &self.grid.nodes {
            if a < b {
                let v = (u.get(a + 1, b) + u.get(a - 1, b) + u.get(a, b + 1) + u.get(a, b - 1)
                    - 4.0 * u.get(a, b))
                    / d2;
                out.set(a, b, v);
            }
        }
        out
    }

    /// `Σ_a Δ f(x_a, x_a) g_a` over interior diagonal nodes.
    pub fn diag_integral(&self, f: &SymmetricKernel, g: &[f64]) -> f64 {
        (1..self.m()).map(|a| self.delta() * f.get(a, a) * g[a]).sum()
    }

    /// `L²` norm of `∂ₓ(σ̄ ∂₁h)` off the diagonal.
    pub fn xi_norm(&self, h: &SymmetricKernel) -> f64 {
        let m = self.m();
        let dh = self.d1(h);
        let d = self.delta();
        let mut s = 0.0;
        for a in 1..m {
            for b in 0..=m {
                if a == b {
                    continue;
                }
                let xi = (self.s_mid[a] * dh[(a, b)] - self.s_mid[a - 1] * dh[(a - 1, b)]) / d;
                s += self.w[a] * self.w[b] * xi * xi;
            }
        }
        s.sqrt()
    }

    /// Applies the inverse Dirichlet-Neumann stiffness to a right-hand side.
    pub fn solve_stiffness(&self, rhs: &[f64]) -> SymmetricKernel {
        self.from_unknowns(&self.factor.solve(rhs))
    }

    /// Smallest generalised eigenvalue of `A x = λ M x` with the lumped
    /// triangle mass, i.e. the discrete Poincaré constant.
    pub fn poincare_constant(&self) -> f64 {
        let g = &self.grid;
        let mass: Vec<f64> = g.nodes.iter().map(|&(a, b)| 0.5 * g.node_weight(a, b)).collect();
        let mut x: Vec<f64> = g.nodes.iter().map(|&(a, b)| 1.0 + 0.01 * ((a * 7 + b * 3) % 5) as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..200 {
            let rhs: Vec<f64> = x.iter().zip(&mass).map(|(v, m)| v * m).collect();
            let y = self.factor.solve(&rhs);
            let ay = self.stiffness.matvec(&y);
            let num: f64 = y.iter().zip(&ay).map(|(p, q)| p * q).sum();
            let den: f64 = y.iter().zip(&mass).map(|(p, m)| p * p * m).sum();
            let next = num / den;
            let norm = den.sqrt();
            x = y.iter().map(|v| v / norm).collect();
            if (next - lambda).abs() < 1e-12 * next {
                return next;
            }
            lambda = next;
        }
        lambda
    }
}

/// Assembles `Σ_edges wt(midpoint) (φ_p - φ_q)²` on the unknowns.
pub fn weighted_stiffness(grid: &TriangleGrid, wt: impl Fn(f64, f64) -> f64) -> BandedMatrix {
    let mut a = BandedMatrix::zeros(grid.unknowns(), grid.m);
    for (p, q) in grid.edges() {
        let e = wt(0.5 * (grid.x(p.0) + grid.x(q.0)), 0.5 * (grid.x(p.1) + grid.x(q.1)));
        let ip = grid.index(p.0, p.1);
        let iq = grid.index(q.0, q.1);
        if let Some(i) = ip {
            a.add(i, i, e);
        }
        if let Some(j) = iq {
            a.add(j, j, e);
        }
        if let (Some(i), Some(j)) = (ip, iq) {
            a.add(i, j, -e);
        }
    }
    a
}
