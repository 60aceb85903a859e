//! Wasserstein CP factorization of sparse nonnegative tensors.
//!
//! Each mode-n unfolding of the data is matched to the unfolding of a CP
//! reconstruction through one entropic transport problem per nonzero
//! column, with KL-relaxed marginals. Transport plans are kept implicit as
//! scaling vectors; factors are refit by multiplicative KL updates.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod ot;
pub mod solver;
pub mod tensor;

pub use error::{ErrorCategory, Result, SwiftError};
pub use metrics::{
    entropy, generalized_kl, reconstruction_error, wasserstein_matrix, wasserstein_tensor,
    DistanceReport, WassersteinMode,
};
pub use ot::{build_kernel, exact_ot, CostModel, ExplicitTransport, TransportScalings};
pub use solver::{
    fit, fit_direct, multiplicative_factor_update, objective_parts, project, DenominatorScale,
    FitOutput, FitTrace, ObjectiveParts, SolverConfig,
};
pub use tensor::{khatri_rao, matricize, tensorize, FactorSet, MatricizedView, SparseTensor};
