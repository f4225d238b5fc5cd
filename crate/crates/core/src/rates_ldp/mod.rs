//! Rate functionals for correlation kernels and Donsker-Varadhan functionals
//! of small chains.

pub mod dv;
pub mod functional;

pub use dv::{correlation_dv, correlation_dv_mc, density_dv, dv_reversible, dv_variational, DvMode, DvReport};
pub use functional::{eval_jh, quadratic_jh, rate_sup, JhTerms, RateReport};
