//! Open symmetric exclusion with reservoirs: simulation, exact small-lattice
//! computations, discrete Gaussian measures and the kernel equations that
//! describe two-point correlations and their large deviations.

pub mod dynamics;
pub mod entropy_lab;
pub mod error;
pub mod fields;
pub mod kernel_pde;
pub mod lattice;
pub mod measures;
pub mod rates_ldp;
pub mod rng;
pub mod stats;

pub use error::{LabError, Result};
pub use lattice::{steady_profile, Configuration, LatticeKernel, Params, Profile};
