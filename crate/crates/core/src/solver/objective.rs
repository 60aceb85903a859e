use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::engine::{check_costs, ModeData};
use super::SolverConfig;
use crate::error::{Result, SwiftError};
use crate::ot::{column_terms, CostModel, TransportScalings};
use crate::tensor::{FactorSet, SparseTensor};

/// The pieces of the factorization objective, summed over modes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParts {
    /// `Σ_n ⟨C̄_n, T̄_n⟩`
    pub transport_cost: f64,
    /// `Σ_n E(T̄_n)`
    pub entropy: f64,
    /// `Σ_n KL(Δ(T̄_n) || X̂_(n))`
    pub reconstruction_kl: f64,
    /// `Σ_n KL(Ψ(T̄_n) || X_(n))`
    pub data_kl: f64,
}

impl ObjectiveParts {
    pub fn total(&self, rho: f64, lambda: f64) -> f64 {
        self.transport_cost - self.entropy / rho + lambda * (self.reconstruction_kl + self.data_kl)
    }
}

impl AddAssign for ObjectiveParts {
    fn add_assign(&mut self, o: ObjectiveParts) {
        self.transport_cost += o.transport_cost;
        self.entropy += o.entropy;
        self.reconstruction_kl += o.reconstruction_kl;
        self.data_kl += o.data_kl;
    }
}

/// Objective contribution of one mode. Columns without a transport problem
/// carry an empty plan, so they add `Σ X̂` over those columns to the
/// reconstruction KL and nothing else.
pub(crate) fn mode_objective(
    factors: &FactorSet,
    mode: usize,
    data: &ModeData,
    scalings: &TransportScalings,
    model: &CostModel,
) -> Result<ObjectiveParts> {
    if scalings.columns() != data.columns.as_slice() {
        return Err(SwiftError::Shape(format!(
            "scalings of mode {mode} do not match the data columns"
        )));
    }
    let xhat = factors.reconstruct_columns(mode, &data.columns)?;
    let mut parts = ObjectiveParts::default();
    let mut listed = 0.0;
    for k in 0..data.columns.len() {
        let u = scalings.u().column(k).to_vec();
        let v = scalings.v().column(k).to_vec();
        let xh = xhat.column(k).to_vec();
        let x = data.x.column(k).to_vec();
        let t = column_terms(model, &u, &v, &xh, &x);
        parts.transport_cost += t.transport_cost;
        parts.entropy += t.entropy;
        parts.reconstruction_kl += t.kl_rows;
        parts.data_kl += t.kl_cols;
        listed += xh.iter().sum::<f64>();
    }
    if data.columns.len() < data.layout.n_cols() {
        parts.reconstruction_kl += (factors.reconstruction_sum() - listed).max(0.0);
    }
    Ok(parts)
}

/// Evaluates every objective part at the given factors and scalings.
pub fn objective_parts(
    tensor: &SparseTensor,
    factors: &FactorSet,
    scalings: &[TransportScalings],
    costs: &[CostModel],
    config: &SolverConfig,
) -> Result<ObjectiveParts> {
    check_costs(tensor.shape(), costs, config)?;
    if scalings.len() != tensor.order() || factors.shape() != tensor.shape() {
        return Err(SwiftError::Shape(
            "factors or scalings do not match the tensor".into(),
        ));
    }
    let mut parts = ObjectiveParts::default();
    for (n, s) in scalings.iter().enumerate() {
        let data = ModeData::with_columns(tensor, n, s.columns())?;
        parts += mode_objective(factors, n, &data, s, &costs[n])?;
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::{build_kernel, column_transport, update_scalings};
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cost(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| (i as f64 - j as f64).abs() / n as f64)
    }

    #[test]
    fn parts_match_explicit_transports() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shape = [3, 4, 2];
        let tensor = SparseTensor::new(
            shape.to_vec(),
            vec![
                (vec![0, 0, 0], 1.0),
                (vec![2, 3, 1], 2.5),
                (vec![1, 1, 0], 0.5),
                (vec![1, 2, 1], 4.0),
            ],
        )
        .unwrap();
        let config = SolverConfig {
            rho: 3.0,
            ..Default::default()
        };
        let costs: Vec<_> = shape
            .iter()
            .map(|&d| build_kernel(cost(d), 3.0).unwrap())
            .collect();
        let factors = FactorSet::random(&shape, 2, &mut rng).unwrap();
        let mut scalings = Vec::new();
        for n in 0..3 {
            let data = ModeData::build(&tensor, n, true).unwrap();
            let mut s =
                TransportScalings::new(n, shape[n], data.columns.clone(), config.phi());
            let xh = factors.reconstruct_columns(n, &data.columns).unwrap();
            update_scalings(data.x.view(), xh.view(), &costs[n], &mut s, &config.scaling_options())
                .unwrap();
            scalings.push(s);
        }
        let parts = objective_parts(&tensor, &factors, &scalings, &costs, &config).unwrap();

        let (mut p1, mut ent) = (0.0, 0.0);
        for (n, s) in scalings.iter().enumerate() {
            for k in 0..s.columns().len() {
                let t = column_transport(s, &costs[n], k);
                p1 += (&t * costs[n].cost()).sum();
                ent -= t.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
            }
        }
        assert!((parts.transport_cost - p1).abs() < 1e-10);
        assert!((parts.entropy - ent).abs() < 1e-10);
        assert!(parts.reconstruction_kl >= 0.0 && parts.data_kl >= 0.0);
        assert!(parts.total(3.0, 1.0).is_finite());
    }
}
