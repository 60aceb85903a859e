//! Timing of one transport sweep with and without zero-column dropping.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cost::build_cost_one_identity;
use crate::error::{Result, SwiftError};
use crate::ot::{build_kernel_with_floor, CostModel};
use crate::solver::engine::Engine;
use crate::solver::{fit, initial_factors, SolverConfig};
use crate::tensor::{multi_index, SparseTensor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// Requested fraction of nonzero mode-0 columns.
    pub column_density: f64,
    /// Measured fraction of nonzero columns, per mode.
    pub measured_density: Vec<f64>,
    pub nnz: usize,
    pub dropped_seconds: f64,
    pub full_seconds: f64,
    /// `full_seconds / dropped_seconds`
    pub speedup: f64,
    pub sequential_seconds: f64,
    /// `sequential_seconds / dropped_seconds` (dropped path, parallel on)
    pub parallel_speedup: f64,
    /// Short fits on both paths gave bit-identical factors.
    pub identical_factors: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub shape: Vec<usize>,
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
}

/// Random tensor whose mode-0 unfolding has roughly `density` nonzero
/// columns: each cell is nonzero with probability `1 - (1 - density)^(1/I_0)`.
pub fn random_tensor_with_column_density(shape: &[usize], density: f64, seed: u64) -> Result<SparseTensor> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(SwiftError::Config(format!("density {density} outside (0, 1]")));
    }
    let q = 1.0 - (1.0 - density).powf(1.0 / shape[0] as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let numel: usize = shape.iter().product();
    let entries = (0..numel)
        .filter_map(|lin| {
            let keep = rng.random_bool(q.min(1.0));
            let v = rng.random_range(0.5..1.5);
            keep.then(|| (multi_index(shape, lin), v))
        })
        .collect();
    SparseTensor::new(shape.to_vec(), entries)
}

fn time_sweep(tensor: &SparseTensor, costs: &[CostModel], config: &SolverConfig, repeats: usize) -> Result<f64> {
    let factors = initial_factors(tensor.shape(), config)?;
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let mut engine = Engine::new(tensor, costs, config)?;
        let t = Instant::now();
        engine.transport_sweep(&factors)?;
        best = best.min(t.elapsed().as_secs_f64());
    }
    Ok(best)
}

/// Times one transport sweep per density with zero columns dropped or kept,
/// and with parallelism on or off. Reports the fastest of `repeats` runs.
pub fn benchmark_sparsity(
    shape: &[usize],
    density_grid: &[f64],
    config: &SolverConfig,
    repeats: usize,
) -> Result<BenchReport> {
    let costs: Vec<CostModel> = shape
        .iter()
        .map(|&d| build_kernel_with_floor(build_cost_one_identity(d), config.rho, config.floor_k))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (k, &density) in density_grid.iter().enumerate() {
        let tensor = random_tensor_with_column_density(shape, density, config.seed.wrapping_add(k as u64))?;
        let dropped = SolverConfig {
            drop_zero_columns: true,
            parallel: true,
            ..config.clone()
        };
        let full = SolverConfig {
            drop_zero_columns: false,
            ..dropped.clone()
        };
        let sequential = SolverConfig {
            parallel: false,
            ..dropped.clone()
        };
        let dropped_seconds = time_sweep(&tensor, &costs, &dropped, repeats)?;
        let full_seconds = time_sweep(&tensor, &costs, &full, repeats)?;
        let sequential_seconds = time_sweep(&tensor, &costs, &sequential, repeats)?;

        let short = |c: &SolverConfig| {
            fit(
                &tensor,
                &costs,
                &SolverConfig {
                    outer_iters: 2,
                    record_objective: false,
                    ..c.clone()
                },
            )
        };
        let identical_factors = short(&dropped)?.factors == short(&full)?.factors;
        let measured_density = (0..shape.len())
            .map(|n| {
                let v = crate::tensor::matricize(&tensor, n)?;
                Ok(v.nnz_cols() as f64 / v.n_cols() as f64)
            })
            .collect::<Result<_>>()?;
        rows.push(BenchRow {
            column_density: density,
            measured_density,
            nnz: tensor.nnz(),
            dropped_seconds,
            full_seconds,
            speedup: full_seconds / dropped_seconds,
            sequential_seconds,
            parallel_speedup: sequential_seconds / dropped_seconds,
            identical_factors,
        });
    }
    Ok(BenchReport {
        shape: shape.to_vec(),
        repeats,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_generator_hits_target() {
        let t = random_tensor_with_column_density(&[20, 20, 20], 0.3, 1).unwrap();
        let v = crate::tensor::matricize(&t, 0).unwrap();
        let d = v.nnz_cols() as f64 / v.n_cols() as f64;
        assert!((d - 0.3).abs() < 0.05, "{d}");
        assert!(random_tensor_with_column_density(&[2, 2], 0.0, 1).is_err());
    }

    #[test]
    fn small_benchmark_runs() {
        let config = SolverConfig {
            rank: 2,
            sinkhorn_iters: 3,
            ..Default::default()
        };
        let r = benchmark_sparsity(&[5, 4, 3], &[0.5, 1.0], &config, 1).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.identical_factors && row.speedup > 0.0));
    }
}
