//! Entropy, generalized KL, Wasserstein distances and reconstruction error.

use ndarray::{Array1, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SwiftError};
use crate::ot::scaling::{kl_term, xlogx};
use crate::ot::{entropic_ot, exact_ot, CostModel};
use crate::tensor::{matricize, FactorSet, SparseTensor, UnfoldLayout};

/// `E(M) = -Σ M log M` with `0 log 0 = 0`.
pub fn entropy(m: ArrayView2<f64>) -> f64 {
    -m.iter().map(|&v| xlogx(v)).sum::<f64>()
}

/// `Σ A log(A/B) - A + B`.
pub fn generalized_kl(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(SwiftError::Shape(format!(
            "KL between {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let mut total = 0.0;
    for ((idx, &x), &y) in a.indexed_iter().zip(b.iter()) {
        if x > 0.0 && y <= 0.0 {
            return Err(SwiftError::KlUndefined(format!(
                "entry {idx:?}: {x} against {y}"
            )));
        }
        total += kl_term(x, y);
    }
    Ok(total)
}

/// How column-level transport values are computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WassersteinMode {
    /// Unregularized optimum (small extents only).
    Exact,
    /// `⟨C, T⟩ - E(T)/ρ` at the balanced Sinkhorn iterate.
    Entropic { iters: usize },
}

fn normalized(col: ndarray::ArrayView1<f64>) -> Array1<f64> {
    let s = col.sum();
    if s > 0.0 {
        col.mapv(|v| v / s)
    } else {
        col.to_owned()
    }
}

/// Sum over columns of the transport value between matching columns of `a`
/// and `b`. Columns that are zero in both contribute nothing.
pub fn wasserstein_matrix(
    a: ArrayView2<f64>,
    b: ArrayView2<f64>,
    model: &CostModel,
    mode: WassersteinMode,
    normalize: bool,
) -> Result<f64> {
    if a.dim() != b.dim() || a.nrows() != model.dim() {
        return Err(SwiftError::Shape(format!(
            "matrices {:?} and {:?} with a {}-bin cost",
            a.dim(),
            b.dim(),
            model.dim()
        )));
    }
    let mut total = 0.0;
    for (p, (ca, cb)) in a.columns().into_iter().zip(b.columns()).enumerate() {
        let (za, zb) = (ca.iter().all(|&v| v == 0.0), cb.iter().all(|&v| v == 0.0));
        if za && zb {
            continue;
        }
        if za != zb {
            return Err(SwiftError::Unbalanced(format!(
                "column {p} is zero in only one of the matrices"
            )));
        }
        let (x, y) = if normalize {
            (normalized(ca), normalized(cb))
        } else {
            (ca.to_owned(), cb.to_owned())
        };
        total += match mode {
            WassersteinMode::Exact => exact_ot(&x, &y, model.cost())?.cost,
            WassersteinMode::Entropic { iters } => {
                let t = entropic_ot(&x, &y, model, iters)?;
                t.cost - t.entropy / model.rho()
            }
        };
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub per_mode: Vec<f64>,
    pub total: f64,
    pub regularized: bool,
    pub normalized: bool,
}

/// Sum over modes of the matrix distance between the two unfoldings.
pub fn wasserstein_tensor(
    x: &SparseTensor,
    y: &SparseTensor,
    costs: &[CostModel],
    mode: WassersteinMode,
    normalize: bool,
) -> Result<DistanceReport> {
    if x.shape() != y.shape() {
        return Err(SwiftError::Shape(format!(
            "tensors {:?} and {:?}",
            x.shape(),
            y.shape()
        )));
    }
    if costs.len() != x.order() {
        return Err(SwiftError::Shape(format!(
            "{} cost models for an order-{} tensor",
            costs.len(),
            x.order()
        )));
    }
    let mut per_mode = Vec::with_capacity(x.order());
    for (n, model) in costs.iter().enumerate() {
        let a = matricize(x, n)?.to_dense();
        let b = matricize(y, n)?.to_dense();
        per_mode.push(wasserstein_matrix(a.view(), b.view(), model, mode, normalize)?);
    }
    Ok(DistanceReport {
        total: per_mode.iter().sum(),
        per_mode,
        regularized: matches!(mode, WassersteinMode::Entropic { .. }),
        normalized: normalize,
    })
}

/// `‖X - X̂‖_F / ‖X‖_F`, summing the stored cells exactly and the remaining
/// cells as `Σ X̂² - Σ_stored X̂²` over a dense mode-0 reconstruction.
pub fn reconstruction_error(tensor: &SparseTensor, factors: &FactorSet) -> Result<f64> {
    if factors.shape() != tensor.shape() {
        return Err(SwiftError::Shape(format!(
            "factors {:?} for tensor {:?}",
            factors.shape(),
            tensor.shape()
        )));
    }
    let norm = tensor.frobenius_norm();
    if norm == 0.0 {
        return Err(SwiftError::EmptyTensor);
    }
    let xhat = factors.reconstruct_mode(0)?;
    let layout = UnfoldLayout::new(tensor.shape(), 0)?;
    let mut stored = Array2::<bool>::from_elem(xhat.dim(), false);
    let mut err = 0.0;
    for (idx, v) in tensor.iter() {
        let col = layout.column(idx);
        stored[[idx[0], col]] = true;
        let d = v - xhat[[idx[0], col]];
        err += d * d;
    }
    for (h, s) in xhat.iter().zip(stored.iter()) {
        if !s {
            err += h * h;
        }
    }
    Ok(err.sqrt() / norm)
}
