use ndarray::{Array1, Array2};

use super::exact::{check_balanced, ExplicitTransport};
use super::scaling::DEFAULT_EPS_DIV;
use super::CostModel;
use crate::error::{Result, SwiftError};

/// Balanced entropic transport between `a` and `b` by `iters` Sinkhorn
/// rounds on the model's kernel.
pub fn entropic_ot(
    a: &Array1<f64>,
    b: &Array1<f64>,
    model: &CostModel,
    iters: usize,
) -> Result<ExplicitTransport> {
    let n = model.dim();
    if a.len() != n || b.len() != n {
        return Err(SwiftError::Shape(format!(
            "marginals of length {}/{} for a {n}-bin cost",
            a.len(),
            b.len()
        )));
    }
    check_balanced(
        a.as_slice().unwrap_or(&a.to_vec()),
        b.as_slice().unwrap_or(&b.to_vec()),
    )?;
    let k = model.kernel();
    let mut u = Array1::<f64>::ones(n);
    let mut v = Array1::<f64>::ones(n);
    for it in 0..iters {
        let ktu = k.t().dot(&u);
        v = Array1::from_shape_fn(n, |j| {
            if b[j] == 0.0 {
                0.0
            } else {
                b[j] / ktu[j].max(DEFAULT_EPS_DIV)
            }
        });
        let kv = k.dot(&v);
        u = Array1::from_shape_fn(n, |i| {
            if a[i] == 0.0 {
                0.0
            } else {
                a[i] / kv[i].max(DEFAULT_EPS_DIV)
            }
        });
        if !u.iter().chain(v.iter()).all(|x| x.is_finite()) {
            return Err(SwiftError::NonFiniteScaling {
                mode: 0,
                column: 0,
                iteration: it,
            });
        }
    }
    let plan = Array2::from_shape_fn((n, n), |(i, j)| u[i] * k[[i, j]] * v[j]);
    Ok(ExplicitTransport::from_plan(plan, model.cost()))
}

/// Entropic transport value `⟨C, T⟩ - E(T)/ρ` at the Sinkhorn iterate.
pub fn entropic_ot_cost(
    a: &Array1<f64>,
    b: &Array1<f64>,
    model: &CostModel,
    iters: usize,
) -> Result<f64> {
    let t = entropic_ot(a, b, model, iters)?;
    Ok(t.cost - t.entropy / model.rho())
}
