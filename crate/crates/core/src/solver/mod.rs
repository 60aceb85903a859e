//! Block-coordinate descent over transport scalings and CP factors.

mod config;
pub mod direct;
pub(crate) mod engine;
mod fit;
mod objective;
mod project;
mod update;

pub use config::{DenominatorScale, SolverConfig};
pub use direct::{direct_operator, direct_targets, fit_direct, kron, unvec_col, vec_col, MAX_DIRECT_DIM};
pub use fit::{fit, fit_from, initial_factors, FitOutput, FitTrace, IterationRecord};
pub use objective::{objective_parts, ObjectiveParts};
pub use project::{project, Projection};
pub use update::{multiplicative_factor_update, FactorUpdate};
