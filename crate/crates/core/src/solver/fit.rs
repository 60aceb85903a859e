use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{Engine, Timer};
use super::objective::ObjectiveParts;
use super::update::apply_multiplicative;
use super::SolverConfig;
use crate::error::{Result, SwiftError};
use crate::ot::{CostModel, TransportScalings};
use crate::tensor::{FactorSet, SparseTensor};

/// State after one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective value; absent when objective recording is off.
    pub total: Option<f64>,
    pub parts: Option<ObjectiveParts>,
    pub ot_seconds: f64,
    pub factor_seconds: f64,
    pub guard_extra_iters: usize,
    pub guard_fallbacks: usize,
    /// Reconstruction entries whose denominator was floored in the factor step.
    pub floored: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitTrace {
    pub records: Vec<IterationRecord>,
    /// Number of transport problems solved per mode.
    pub nnz_per_mode: Vec<usize>,
}

impl FitTrace {
    /// Objective values of the recorded iterations.
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.total).collect()
    }

    pub fn final_objective(&self) -> Option<f64> {
        self.records.last().and_then(|r| r.total)
    }
}

#[derive(Clone, Debug)]
pub struct FitOutput {
    pub factors: FactorSet,
    pub trace: FitTrace,
    pub scalings: Vec<TransportScalings>,
}

/// How the factor block of a sweep is updated.
pub(crate) trait FactorStep {
    fn update(
        &mut self,
        engine: &Engine<'_>,
        factors: &FactorSet,
        deltas: &[Array2<f64>],
        mode: usize,
    ) -> Result<(Array2<f64>, usize)>;
}

pub(crate) struct StackedStep;

impl FactorStep for StackedStep {
    fn update(
        &mut self,
        engine: &Engine<'_>,
        factors: &FactorSet,
        deltas: &[Array2<f64>],
        mode: usize,
    ) -> Result<(Array2<f64>, usize)> {
        let stacked = engine.stacked_deltas(deltas, mode)?;
        let up = apply_multiplicative(
            factors,
            mode,
            &stacked,
            engine.config.denominator_factor(factors.order()),
            engine.config.eps_div,
        )?;
        Ok((up.factor, up.floored))
    }
}

/// Runs the outer iterations, updating only the factors listed in `modes`.
pub(crate) fn run_sweeps(
    engine: &mut Engine<'_>,
    mut factors: FactorSet,
    modes: &[usize],
    step: &mut dyn FactorStep,
) -> Result<(FactorSet, FitTrace)> {
    let config = engine.config;
    let mut trace = FitTrace {
        records: Vec::with_capacity(config.outer_iters),
        nnz_per_mode: engine.modes.iter().map(|m| m.columns.len()).collect(),
    };
    for iteration in 0..config.outer_iters {
        let timer = Timer::start();
        let stats = engine.transport_sweep(&factors)?;
        let deltas = engine.deltas();
        let ot_seconds = timer.secs();

        let timer = Timer::start();
        let mut floored = 0;
        for &n in modes {
            let (a, f) = step.update(engine, &factors, &deltas, n)?;
            factors.set_factor(n, a)?;
            floored += f;
        }
        let factor_seconds = timer.secs();
        if floored > 0 {
            log::warn!("iteration {iteration}: {floored} floored reconstruction entries");
        }

        let (total, parts) = if config.record_objective {
            let parts = engine.objective(&factors)?;
            let total = parts.total(config.rho, config.lambda);
            if !total.is_finite() {
                return Err(SwiftError::NonFiniteObjective {
                    iteration,
                    detail: format!("{parts:?}"),
                });
            }
            log::debug!("iteration {iteration}: objective {total}");
            (Some(total), Some(parts))
        } else {
            (None, None)
        };
        trace.records.push(IterationRecord {
            iteration,
            total,
            parts,
            ot_seconds,
            factor_seconds,
            guard_extra_iters: stats.extra_iters,
            guard_fallbacks: stats.fallbacks,
            floored,
        });
    }
    Ok((factors, trace))
}

/// Random initial factors drawn from the configured seed.
pub fn initial_factors(shape: &[usize], config: &SolverConfig) -> Result<FactorSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    FactorSet::random(shape, config.rank, &mut rng)
}

/// Fits a rank-`config.rank` factorization from seeded random factors.
pub fn fit(tensor: &SparseTensor, costs: &[CostModel], config: &SolverConfig) -> Result<FitOutput> {
    config.validate()?;
    let init = initial_factors(tensor.shape(), config)?;
    fit_from(tensor, costs, config, init)
}

/// Fits starting from the given factors.
pub fn fit_from(
    tensor: &SparseTensor,
    costs: &[CostModel],
    config: &SolverConfig,
    init: FactorSet,
) -> Result<FitOutput> {
    if init.shape() != tensor.shape() || init.rank() != config.rank {
        return Err(SwiftError::Shape(format!(
            "initial factors {:?} rank {} do not match tensor {:?} rank {}",
            init.shape(),
            init.rank(),
            tensor.shape(),
            config.rank
        )));
    }
    let mut engine = Engine::new(tensor, costs, config)?;
    let modes: Vec<usize> = (0..tensor.order()).collect();
    let (factors, trace) = run_sweeps(&mut engine, init, &modes, &mut StackedStep)?;
    Ok(FitOutput {
        factors,
        trace,
        scalings: engine.scalings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::build_kernel;

    fn costs(shape: &[usize], rho: f64) -> Vec<CostModel> {
        shape
            .iter()
            .map(|&d| {
                let c = Array2::from_shape_fn((d, d), |(i, j)| if i == j { 0.0 } else { 1.0 });
                build_kernel(c, rho).unwrap()
            })
            .collect()
    }

    fn tensor() -> SparseTensor {
        SparseTensor::new(
            vec![3, 3, 2],
            vec![
                (vec![0, 0, 0], 1.0),
                (vec![1, 2, 1], 3.0),
                (vec![2, 1, 0], 2.0),
                (vec![0, 2, 1], 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn objective_does_not_increase() {
        let config = SolverConfig {
            rank: 2,
            outer_iters: 15,
            ..Default::default()
        };
        let out = fit(&tensor(), &costs(&[3, 3, 2], 50.0), &config).unwrap();
        let obj = out.trace.objectives();
        assert_eq!(obj.len(), 15);
        for w in obj.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{} > {}", w[1], w[0]);
        }
        assert!(out.factors.factors().iter().all(|a| a.iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn empty_tensor_and_bad_costs_fail() {
        let config = SolverConfig::default();
        let empty = SparseTensor::empty(vec![2, 2]).unwrap();
        assert!(matches!(
            fit(&empty, &costs(&[2, 2], 50.0), &config),
            Err(SwiftError::EmptyTensor)
        ));
        assert!(fit(&tensor(), &costs(&[3, 3], 50.0), &config).is_err());
        assert!(fit(&tensor(), &costs(&[3, 3, 2], 10.0), &config).is_err());
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let base = SolverConfig {
            rank: 2,
            outer_iters: 5,
            chunk_size: 1,
            ..Default::default()
        };
        let seq = SolverConfig {
            parallel: false,
            ..base.clone()
        };
        let c = costs(&[3, 3, 2], 50.0);
        let a = fit(&tensor(), &c, &base).unwrap();
        let b = fit(&tensor(), &c, &seq).unwrap();
        assert_eq!(a.factors, b.factors);
    }
}
