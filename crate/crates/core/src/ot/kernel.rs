use ndarray::Array2;

use crate::error::{Result, SwiftError};

/// Default lower clamp for Gibbs kernel entries.
pub const DEFAULT_FLOOR_K: f64 = 1e-300;

/// A per-mode ground cost and its Gibbs kernel `K = exp(-ρC - 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    cost: Array2<f64>,
    kernel: Array2<f64>,
    rho: f64,
    floor_k: f64,
}

impl CostModel {
    pub fn cost(&self) -> &Array2<f64> {
        &self.cost
    }

    pub fn kernel(&self) -> &Array2<f64> {
        &self.kernel
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn floor_k(&self) -> f64 {
        self.floor_k
    }

    pub fn dim(&self) -> usize {
        self.cost.nrows()
    }
}

/// Validates a cost matrix: square, finite, exactly symmetric, zero diagonal
/// and nonnegative off-diagonal.
pub fn validate_cost(cost: &Array2<f64>) -> Result<()> {
    let (n, m) = cost.dim();
    if n != m || n == 0 {
        return Err(SwiftError::Cost(format!("cost matrix must be square, got {n}x{m}")));
    }
    for i in 0..n {
        if cost[[i, i]] != 0.0 {
            return Err(SwiftError::Cost(format!(
                "diagonal entry ({i},{i}) is {}",
                cost[[i, i]]
            )));
        }
        for j in 0..n {
            let c = cost[[i, j]];
            if !c.is_finite() {
                return Err(SwiftError::Cost(format!("entry ({i},{j}) is not finite")));
            }
            if c < 0.0 {
                return Err(SwiftError::Cost(format!("entry ({i},{j}) is negative: {c}")));
            }
            if c != cost[[j, i]] {
                return Err(SwiftError::Cost(format!(
                    "not symmetric at ({i},{j}): {c} vs {}",
                    cost[[j, i]]
                )));
            }
        }
    }
    Ok(())
}

/// Builds `K = max(exp(-ρC - 1), floor_k)` with the default floor.
pub fn build_kernel(cost: Array2<f64>, rho: f64) -> Result<CostModel> {
    build_kernel_with_floor(cost, rho, DEFAULT_FLOOR_K)
}

pub fn build_kernel_with_floor(cost: Array2<f64>, rho: f64, floor_k: f64) -> Result<CostModel> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(SwiftError::Config(format!("rho must be positive, got {rho}")));
    }
    if !(floor_k > 0.0) {
        return Err(SwiftError::Config(format!("floor_k must be positive, got {floor_k}")));
    }
    validate_cost(&cost)?;
    let kernel = cost.mapv(|c| (-rho * c - 1.0).exp().max(floor_k));
    Ok(CostModel {
        cost,
        kernel,
        rho,
        floor_k,
    })
}
