//! Open exclusion dynamics: rates, kinetic Monte Carlo and exact generators.

pub mod exact;
pub mod kmc;
pub mod path;
pub mod rates;
mod tree;

pub use exact::{build_generator, evolve_master, invariant_measure, GeneratorMatrix};
pub use kmc::{kmc_run, Observer, OccupationObserver, RunSummary};
pub use path::{log_rn_derivative, PathRecorder};
pub use rates::{boundary_rate, bulk_rate, Event, RateState, Side};
