use serde::{Deserialize, Serialize};

use crate::error::{Result, SwiftError};
use crate::ot::{DescentGuard, ScalingOptions, DEFAULT_EPS_DIV, DEFAULT_FLOOR_K};

/// Scale of the multiplicative-update denominator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorScale {
    /// `N · 1·A_⊙`, the gradient of the N stacked KL terms.
    #[default]
    Stacked,
    /// `1·A_⊙` as printed in the original update rule.
    Paper,
}

impl std::str::FromStr for DenominatorScale {
    type Err = SwiftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stacked" => Ok(DenominatorScale::Stacked),
            "paper" => Ok(DenominatorScale::Paper),
            other => Err(SwiftError::Config(format!("unknown denominator scale {other:?}"))),
        }
    }
}

/// Solver hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub rank: usize,
    /// Entropic regularization ρ.
    pub rho: f64,
    /// Weight λ of the KL marginal penalties.
    pub lambda: f64,
    pub outer_iters: usize,
    pub sinkhorn_iters: usize,
    pub seed: u64,
    pub eps_div: f64,
    pub floor_k: f64,
    pub warm_start: bool,
    pub parallel: bool,
    /// Columns per parallel task in the scaling updates.
    pub chunk_size: usize,
    pub denominator_scale: DenominatorScale,
    /// Solve transport problems only on nonzero columns.
    pub drop_zero_columns: bool,
    /// Keep each column's transport objective from increasing across sweeps.
    pub descent_guard: bool,
    /// Cap on total Sinkhorn rounds per column when the guard is active.
    pub guard_max_iters: usize,
    /// Evaluate the full objective after every sweep.
    pub record_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank: 5,
            rho: 50.0,
            lambda: 1.0,
            outer_iters: 50,
            sinkhorn_iters: 25,
            seed: 0,
            eps_div: DEFAULT_EPS_DIV,
            floor_k: DEFAULT_FLOOR_K,
            warm_start: true,
            parallel: true,
            chunk_size: 64,
            denominator_scale: DenominatorScale::Stacked,
            drop_zero_columns: true,
            descent_guard: true,
            guard_max_iters: 10_000,
            record_objective: true,
        }
    }
}

impl SolverConfig {
    /// `Φ = λρ / (λρ + 1)`.
    pub fn phi(&self) -> f64 {
        let lr = self.lambda * self.rho;
        lr / (lr + 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(SwiftError::Config(msg));
        if self.rank == 0 {
            return bad("rank must be at least 1".into());
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if self.outer_iters == 0 || self.sinkhorn_iters == 0 || self.chunk_size == 0 {
            return bad("iteration counts and chunk size must be at least 1".into());
        }
        if !(self.eps_div > 0.0) || !(self.floor_k > 0.0) {
            return bad("numerical floors must be positive".into());
        }
        let phi = self.phi();
        if !(phi > 0.0 && phi < 1.0) {
            return bad(format!("phi = {phi} outside (0, 1)"));
        }
        if self.descent_guard && self.guard_max_iters < self.sinkhorn_iters {
            return bad("guard_max_iters must be at least sinkhorn_iters".into());
        }
        Ok(())
    }

    pub fn scaling_options(&self) -> ScalingOptions {
        ScalingOptions {
            sinkhorn_iters: self.sinkhorn_iters,
            eps_div: self.eps_div,
            warm_start: self.warm_start,
            parallel: self.parallel,
            chunk_size: self.chunk_size,
            guard: self.descent_guard.then_some(DescentGuard {
                lambda: self.lambda,
                max_iters: self.guard_max_iters,
                rel_tol: 1e-12,
            }),
        }
    }

    pub(crate) fn denominator_factor(&self, order: usize) -> f64 {
        match self.denominator_scale {
            DenominatorScale::Stacked => order as f64,
            DenominatorScale::Paper => 1.0,
        }
    }
}
