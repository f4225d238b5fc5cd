//! Uniform grid on the square and its upper triangle `{x < y}`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::lattice::{LatticeKernel, Params};

/// Boundary class of a node of the closed upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    /// On the sides `x = -1` or `y = 1`, including both corners.
    Dirichlet,
    /// On the diagonal, away from the corners.
    Neumann,
}

/// Node bookkeeping for `M` intervals per side.
#[derive(Debug, Clone)]
pub struct TriangleGrid {
    pub m: usize,
    pub delta: f64,
    /// Unknown nodes `(a, b)`, `1 ≤ a ≤ b ≤ M-1`, in row-major order.
    pub nodes: Vec<(usize, usize)>,
    row_start: Vec<usize>,
}

impl TriangleGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 {
            return Err(LabError::InvalidArgument(format!("grid resolution M = {m} is below 8")));
        }
        let mut nodes = Vec::new();
        let mut row_start = vec![0; m + 1];
        for a in 1..m {
            row_start[a] = nodes.len();
            for b in a..m {
                nodes.push((a, b));
            }
        }
        row_start[m] = nodes.len();
        Ok(Self { m, delta: 2.0 / m as f64, nodes, row_start })
    }

    #[inline]
    pub fn x(&self, a: usize) -> f64 {
        -1.0 + a as f64 * self.delta
    }

    pub fn class(&self, a: usize, b: usize) -> NodeClass {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if a == 0 || b == self.m {
            NodeClass::Dirichlet
        } else if a == b {
            NodeClass::Neumann
        } else {
            NodeClass::Interior
        }
    }

    /// Unknown index of node `(a, b)` with `a ≤ b`, if it is not a Dirichlet node.
    #[inline]
    pub fn index(&self, a: usize, b: usize) -> Option<usize> {
        if a == 0 || b >= self.m || a > b {
            None
        } else {
            Some(self.row_start[a] + (b - a))
        }
    }

    pub fn unknowns(&self) -> usize {
        self.nodes.len()
    }

    /// Trapezoid weights of the one-dimensional grid.
    pub fn trapezoid(&self) -> Vec<f64> {
        let mut w = vec![self.delta; self.m + 1];
        w[0] *= 0.5;
        w[self.m] *= 0.5;
        w
    }

    /// Square-integral weight carried by an unknown node: the node and its mirror image.
    pub fn node_weight(&self, a: usize, b: usize) -> f64 {
        let d2 = self.delta * self.delta;
        if a == b {
            d2
        } else {
            2.0 * d2
        }
    }

    /// Edges of the closed triangle as pairs of nodes, with their midpoints.
    pub fn edges(&self) -> Vec<((usize, usize), (usize, usize))> {
        let m = self.m;
        let mut e = Vec::with_capacity(2 * m * m);
        for a in 0..=m {
            for b in a..=m {
                if a < b {
                    e.push(((a, b), (a + 1, b)));
                }
                if b < m {
                    e.push(((a, b), (a, b + 1)));
                }
            }
        }
        e
    }
}

/// Symmetric function on the square, stored at all `(M+1)²` grid nodes.
///
/// Values on the diagonal are the common limit from both triangles, so
/// kernels with a normal-derivative jump across the diagonal are stored
/// without loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricKernel {
    pub m: usize,
    pub values: Vec<f64>,
}

impl SymmetricKernel {
    pub fn zeros(m: usize) -> Self {
        Self { m, values: vec![0.0; (m + 1) * (m + 1)] }
    }

    /// Samples `f(x, y)` for `x ≤ y` and mirrors it.
    pub fn from_fn(m: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut k = Self::zeros(m);
        let d = 2.0 / m as f64;
        for a in 0..=m {
            for b in a..=m {
                k.set(a, b, f(-1.0 + a as f64 * d, -1.0 + b as f64 * d));
            }
        }
        k
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.m + 1
    }

    #[inline]
    pub fn delta(&self) -> f64 {
        2.0 / self.m as f64
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values[a * (self.m + 1) + b]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        let n = self.m + 1;
        self.values[a * n + b] = v;
        self.values[b * n + a] = v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { m: self.m, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.m, other.m, "kernels live on different grids");
        Self {
            m: self.m,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Largest violation of `u(x, y) = u(y, x)`.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n();
        let mut d: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                d = d.max((self.get(a, b) - self.get(b, a)).abs());
            }
        }
        d
    }

    /// Largest absolute value on the boundary of the square.
    pub fn boundary_max(&self) -> f64 {
        let n = self.n();
        let mut d: f64 = 0.0;
        for a in 0..n {
            for &(p, q) in &[(0, a), (self.m, a), (a, 0), (a, self.m)] {
                d = d.max(self.get(p, q).abs());
            }
        }
        d
    }

    /// Piecewise-linear interpolation on the triangulation whose cells are
    /// split along the direction `(1, 1)`. The split never crosses the
    /// diagonal, so a kink along it is reproduced exactly.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (x, y) = if x <= y { (x, y) } else { (y, x) };
        let d = self.delta();
        let fx = ((x + 1.0) / d).clamp(0.0, self.m as f64);
        let fy = ((y + 1.0) / d).clamp(0.0, self.m as f64);
        let a = (fx.floor() as usize).min(self.m - 1);
        let b = (fy.floor() as usize).min(self.m - 1);
        let s = fx - a as f64;
        let t = fy - b as f64;
        let v00 = self.get(a, b);
        let v11 = self.get(a + 1, b + 1);
        if s >= t {
            let v10 = self.get(a + 1, b);
            v00 + (v10 - v00) * s + (v11 - v10) * t
        } else {
            let v01 = self.get(a, b + 1);
            v00 + (v01 - v00) * t + (v11 - v01) * s
        }
    }

    /// Kernel values at lattice points `(i/N, j/N)`.
    pub fn sample_lattice(&self, params: &Params) -> LatticeKernel {
        LatticeKernel::from_fn(params, |x, y| self.eval(x, y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_partition_the_closed_triangle() {
        let g = TriangleGrid::new(8).unwrap();
        assert_eq!(g.class(0, 0), NodeClass::Dirichlet);
        assert_eq!(g.class(8, 8), NodeClass::Dirichlet);
        assert_eq!(g.class(0, 5), NodeClass::Dirichlet);
        assert_eq!(g.class(3, 8), NodeClass::Dirichlet);
        assert_eq!(g.class(3, 3), NodeClass::Neumann);
        assert_eq!(g.class(2, 5), NodeClass::Interior);
        assert_eq!(g.unknowns(), 7 * 8 / 2);
        for (k, &(a, b)) in g.nodes.iter().enumerate() {
            assert_eq!(g.index(a, b), Some(k));
        }
        assert!(TriangleGrid::new(4).is_err());
    }

    #[test]
    fn interpolation_is_exact_for_piecewise_linear_kink() {
        let f = |x: f64, y: f64| {
            let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
            1.0 + 0.3 * lo - hi
        };
        let k = SymmetricKernel::from_fn(16, f);
        for &(x, y) in &[(-0.5, 0.25), (0.13, -0.71), (0.1, 0.1 + 1e-9), (0.52, 0.5), (0.9, -0.33)] {
            assert!((k.eval(x, y) - f(x, y)).abs() < 1e-12);
        }
    }
}
