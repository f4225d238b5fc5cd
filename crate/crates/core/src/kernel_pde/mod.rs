//! Kernel equations on the square and their discretisation.

pub mod banded;
pub mod basis;
pub mod grid;
pub mod operator;
pub mod ops;
pub mod solvers;

pub use basis::BiasSpec;
pub use grid::{NodeClass, SymmetricKernel, TriangleGrid};
pub use operator::{g_from_k, k_from_g, KernelOperator};
pub use ops::PdeContext;
pub use solvers::{
    laplacian_solve, solve_euler_lagrange, solve_main_equation, solve_poisson, FixedPointOptions,
    FixedPointSolution,
};
