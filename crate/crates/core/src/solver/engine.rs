//! State shared by the fitting, projection and direct solvers: per-mode data
//! blocks, cost models and transport scalings.

use std::time::Instant;

use ndarray::{Array2, ShapeBuilder};

use super::objective::{mode_objective, ObjectiveParts};
use super::SolverConfig;
use crate::error::{Result, SwiftError};
use crate::ot::{delta, update_scalings, CostModel, ScalingStats, TransportScalings};
use crate::tensor::{matricize, pi_accumulate_columns, FactorSet, SparseTensor, UnfoldLayout};

/// Data of one mode restricted to the columns whose transport problems are solved.
#[derive(Clone, Debug)]
pub(crate) struct ModeData {
    pub layout: UnfoldLayout,
    pub columns: Vec<usize>,
    pub x: Array2<f64>,
}

impl ModeData {
    pub fn build(tensor: &SparseTensor, mode: usize, drop_zero_columns: bool) -> Result<Self> {
        let view = matricize(tensor, mode)?;
        let layout = UnfoldLayout::new(tensor.shape(), mode)?;
        if drop_zero_columns {
            return Ok(ModeData {
                layout,
                columns: view.nonzero_columns().to_vec(),
                x: view.block().clone(),
            });
        }
        let mut x = Array2::zeros((layout.rows(), layout.n_cols()).f());
        for (k, &c) in view.nonzero_columns().iter().enumerate() {
            x.column_mut(c).assign(&view.block().column(k));
        }
        Ok(ModeData {
            columns: (0..layout.n_cols()).collect(),
            layout,
            x,
        })
    }

    /// Data columns for an arbitrary column list.
    pub fn with_columns(tensor: &SparseTensor, mode: usize, columns: &[usize]) -> Result<Self> {
        let view = matricize(tensor, mode)?;
        let layout = UnfoldLayout::new(tensor.shape(), mode)?;
        let nz = view.nonzero_columns();
        let mut x = Array2::zeros((layout.rows(), columns.len()).f());
        for (k, c) in columns.iter().enumerate() {
            if *c >= layout.n_cols() {
                return Err(SwiftError::Shape(format!(
                    "column {c} out of range for mode {mode}"
                )));
            }
            if let Ok(pos) = nz.binary_search(c) {
                x.column_mut(k).assign(&view.block().column(pos));
            }
        }
        Ok(ModeData {
            layout,
            columns: columns.to_vec(),
            x,
        })
    }
}

pub(crate) fn check_costs(shape: &[usize], costs: &[CostModel], config: &SolverConfig) -> Result<()> {
    if costs.len() != shape.len() {
        return Err(SwiftError::Shape(format!(
            "{} cost models for an order-{} tensor",
            costs.len(),
            shape.len()
        )));
    }
    for (n, (c, &d)) in costs.iter().zip(shape).enumerate() {
        if c.dim() != d {
            return Err(SwiftError::Shape(format!(
                "cost model {n} has size {}, mode extent is {d}",
                c.dim()
            )));
        }
        if c.rho() != config.rho {
            return Err(SwiftError::Config(format!(
                "cost model {n} built with rho {} but config has {}",
                c.rho(),
                config.rho
            )));
        }
    }
    Ok(())
}

pub(crate) struct Engine<'a> {
    pub shape: Vec<usize>,
    pub modes: Vec<ModeData>,
    pub costs: &'a [CostModel],
    pub config: &'a SolverConfig,
    pub scalings: Vec<TransportScalings>,
}

impl<'a> Engine<'a> {
    pub fn new(tensor: &SparseTensor, costs: &'a [CostModel], config: &'a SolverConfig) -> Result<Self> {
        config.validate()?;
        check_costs(tensor.shape(), costs, config)?;
        if tensor.nnz() == 0 {
            return Err(SwiftError::EmptyTensor);
        }
        let modes = (0..tensor.order())
            .map(|n| ModeData::build(tensor, n, config.drop_zero_columns))
            .collect::<Result<Vec<_>>>()?;
        let phi = config.phi();
        let scalings = modes
            .iter()
            .enumerate()
            .map(|(n, m)| TransportScalings::new(n, m.layout.rows(), m.columns.clone(), phi))
            .collect();
        Ok(Engine {
            shape: tensor.shape().to_vec(),
            modes,
            costs,
            config,
            scalings,
        })
    }

    /// Updates the transport scalings of every mode against the current factors.
    pub fn transport_sweep(&mut self, factors: &FactorSet) -> Result<ScalingStats> {
        let opts = self.config.scaling_options();
        let mut stats = ScalingStats::default();
        for (n, mode) in self.modes.iter().enumerate() {
            if mode.columns.is_empty() {
                continue;
            }
            let xhat = factors.reconstruct_columns(n, &mode.columns)?;
            let s = update_scalings(
                mode.x.view(),
                xhat.view(),
                &self.costs[n],
                &mut self.scalings[n],
                &opts,
            )?;
            stats.extra_iters += s.extra_iters;
            stats.fallbacks += s.fallbacks;
        }
        Ok(stats)
    }

    /// `Δ` for each mode, restricted to that mode's columns.
    pub fn deltas(&self) -> Vec<Array2<f64>> {
        self.scalings
            .iter()
            .zip(self.costs)
            .map(|(s, c)| delta(s, c))
            .collect()
    }

    /// `Σ_i Π(Δ_i, n)` as a dense mode-n unfolding.
    pub fn stacked_deltas(&self, deltas: &[Array2<f64>], mode: usize) -> Result<Array2<f64>> {
        let layout = &self.modes[mode].layout;
        let mut sum = Array2::zeros((layout.rows(), layout.n_cols()));
        for (i, d) in deltas.iter().enumerate() {
            pi_accumulate_columns(d.view(), &self.modes[i].columns, i, mode, &self.shape, &mut sum)?;
        }
        Ok(sum)
    }

    pub fn objective(&self, factors: &FactorSet) -> Result<ObjectiveParts> {
        let mut parts = ObjectiveParts::default();
        for (n, mode) in self.modes.iter().enumerate() {
            parts += mode_objective(factors, n, mode, &self.scalings[n], &self.costs[n])?;
        }
        Ok(parts)
    }
}

pub(crate) struct Timer(Instant);

impl Timer {
    pub fn start() -> Self {
        Timer(Instant::now())
    }

    pub fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}
