//! Cost models, Gibbs kernels and transport solvers.

mod entropic;
mod exact;
mod kernel;
pub mod scaling;

pub use entropic::{entropic_ot, entropic_ot_cost};
pub use exact::{exact_ot, ExplicitTransport, MAX_EXACT_DIM};
pub use kernel::{build_kernel, build_kernel_with_floor, validate_cost, CostModel, DEFAULT_FLOOR_K};
pub use scaling::{
    column_terms, column_transport, delta, delta_full, half_step_u, half_step_v, psi,
    update_scalings, ColumnTerms, DescentGuard, ScalingOptions, ScalingStats, TransportScalings,
    DEFAULT_EPS_DIV,
};
