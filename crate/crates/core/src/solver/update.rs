use ndarray::{Array1, Array2, Axis};

use super::SolverConfig;
use crate::error::{Result, SwiftError};
use crate::tensor::{check_mode, pi_rearrange, FactorSet};

/// A new factor matrix and the number of reconstruction entries whose
/// denominator had to be floored.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorUpdate {
    pub factor: Array2<f64>,
    pub floored: usize,
}

/// One multiplicative KL step on `A_n` against the stacked targets:
/// `A_n ← A_n ∗ ((Σ_i Π(Δ_i, n) ⊘ P) B) ⊘ (s · 1 B)` with `P = A_n Bᵀ`.
///
/// `deltas[i]` is the full mode-i unfolding of `Δ(T̄_i)`.
pub fn multiplicative_factor_update(
    factors: &FactorSet,
    mode: usize,
    deltas: &[Array2<f64>],
    config: &SolverConfig,
) -> Result<FactorUpdate> {
    let order = factors.order();
    check_mode(mode, order)?;
    if deltas.len() != order {
        return Err(SwiftError::Shape(format!(
            "{} marginal matrices for an order-{order} factorization",
            deltas.len()
        )));
    }
    let shape = factors.shape();
    let mut stacked: Option<Array2<f64>> = None;
    for (i, d) in deltas.iter().enumerate() {
        let moved = pi_rearrange(d.view(), i, mode, &shape)?;
        match stacked.as_mut() {
            Some(s) => *s += &moved,
            None => stacked = Some(moved),
        }
    }
    let stacked = stacked.expect("order is at least 2");
    apply_multiplicative(
        factors,
        mode,
        &stacked,
        config.denominator_factor(order),
        config.eps_div,
    )
}

/// Multiplicative step given the already summed targets `S` (`I_n × I_(-n)`).
/// Only columns where `S` has mass contribute to the numerator.
pub(crate) fn apply_multiplicative(
    factors: &FactorSet,
    mode: usize,
    stacked: &Array2<f64>,
    scale: f64,
    eps: f64,
) -> Result<FactorUpdate> {
    let a = factors.factor(mode);
    let b = factors.khatri_rao_excluding(mode)?;
    if stacked.dim() != (a.nrows(), b.nrows()) {
        return Err(SwiftError::Shape(format!(
            "targets {:?} do not match the mode-{mode} unfolding {:?}",
            stacked.dim(),
            (a.nrows(), b.nrows())
        )));
    }
    let rank = factors.rank();
    let mut numer = Array2::<f64>::zeros((a.nrows(), rank));
    let mut floored = 0;
    let mut p = Array1::<f64>::zeros(a.nrows());
    for (j, s) in stacked.axis_iter(Axis(1)).enumerate() {
        if s.iter().all(|&v| v == 0.0) {
            continue;
        }
        let bj = b.row(j);
        p.assign(&a.dot(&bj));
        for i in 0..a.nrows() {
            if s[i] == 0.0 {
                continue;
            }
            let denom = if p[i] < eps {
                floored += 1;
                eps
            } else {
                p[i]
            };
            let q = s[i] / denom;
            for r in 0..rank {
                numer[[i, r]] += q * bj[r];
            }
        }
    }
    let colsum = b.sum_axis(Axis(0));
    let factor = Array2::from_shape_fn(a.dim(), |(i, r)| {
        let d = scale * colsum[r];
        if a[[i, r]] == 0.0 || d == 0.0 {
            0.0
        } else {
            a[[i, r]] * numer[[i, r]] / d
        }
    });
    if factor.iter().any(|v| !v.is_finite()) {
        return Err(SwiftError::NonFiniteObjective {
            iteration: 0,
            detail: format!("factor update of mode {mode} produced a non-finite entry"),
        });
    }
    Ok(FactorUpdate { factor, floored })
}
