use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::engine::Engine;
use super::fit::{run_sweeps, FitTrace, StackedStep};
use super::SolverConfig;
use crate::error::{Result, SwiftError};
use crate::ot::CostModel;
use crate::tensor::{FactorSet, SparseTensor};

#[derive(Clone, Debug)]
pub struct Projection {
    /// The fitted mode-0 factor of the new data.
    pub factor: Array2<f64>,
    /// The new mode-0 factor together with the unchanged trained factors.
    pub factors: FactorSet,
    pub trace: FitTrace,
}

/// Learns a mode-0 factor for `tensor` with every other factor held at its
/// trained value.
pub fn project(
    tensor: &SparseTensor,
    trained: &FactorSet,
    costs: &[CostModel],
    config: &SolverConfig,
) -> Result<Projection> {
    config.validate()?;
    let shape = tensor.shape();
    let trained_shape = trained.shape();
    if shape.len() != trained_shape.len() || shape[1..] != trained_shape[1..] {
        return Err(SwiftError::Shape(format!(
            "tensor {shape:?} does not match trained extents {trained_shape:?} beyond mode 0"
        )));
    }
    if trained.rank() != config.rank {
        return Err(SwiftError::Config(format!(
            "trained rank {} but config rank {}",
            trained.rank(),
            config.rank
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = FactorSet::random(&[shape[0], 1], config.rank, &mut rng)?;
    let mut factors = trained.factors().to_vec();
    factors[0] = init.factor(0).clone();
    let factors = FactorSet::new(factors)?;

    let mut engine = Engine::new(tensor, costs, config)?;
    let (factors, trace) = run_sweeps(&mut engine, factors, &[0], &mut StackedStep)?;
    Ok(Projection {
        factor: factors.factor(0).clone(),
        factors,
        trace,
    })
}
