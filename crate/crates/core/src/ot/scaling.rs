//! Batched scaling updates for the KL-relaxed transport problems of one mode.
//!
//! Column `j` of a mode-n unfolding carries its own transport plan
//! `T_j = diag(u_j) K diag(v_j)` between `X̂_(n)(:, j)` and `X_(n)(:, j)`.
//! Plans are never stored; only the scalings `U`, `V` are. Columns are
//! independent and may be processed in parallel.

use ndarray::{Array2, ArrayView2, ShapeBuilder};
use rayon::prelude::*;

use super::CostModel;
use crate::error::{Result, SwiftError};

/// Default floor applied to scaling denominators.
pub const DEFAULT_EPS_DIV: f64 = 1e-300;

/// Scalings `U_n`, `V_n` for the listed columns of a mode-n unfolding.
#[derive(Clone, Debug, PartialEq)]
pub struct TransportScalings {
    mode: usize,
    phi: f64,
    columns: Vec<usize>,
    u: Array2<f64>,
    v: Array2<f64>,
    fresh: bool,
}

impl TransportScalings {
    /// All-ones scalings for `columns` of an unfolding with `rows` rows.
    pub fn new(mode: usize, rows: usize, columns: Vec<usize>, phi: f64) -> Self {
        let k = columns.len();
        TransportScalings {
            mode,
            phi,
            columns,
            u: Array2::ones((rows, k).f()),
            v: Array2::ones((rows, k).f()),
            fresh: true,
        }
    }

    /// Scalings from explicit matrices (both `rows × columns.len()`).
    pub fn from_parts(
        mode: usize,
        phi: f64,
        columns: Vec<usize>,
        u: Array2<f64>,
        v: Array2<f64>,
    ) -> Result<Self> {
        if u.dim() != v.dim() || u.ncols() != columns.len() {
            return Err(SwiftError::Shape(format!(
                "scalings {:?}/{:?} do not match {} columns",
                u.dim(),
                v.dim(),
                columns.len()
            )));
        }
        let mut fu = Array2::zeros(u.raw_dim().f());
        fu.assign(&u);
        let mut fv = Array2::zeros(v.raw_dim().f());
        fv.assign(&v);
        Ok(TransportScalings {
            mode,
            phi,
            columns,
            u: fu,
            v: fv,
            fresh: false,
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn u(&self) -> &Array2<f64> {
        &self.u
    }

    pub fn v(&self) -> &Array2<f64> {
        &self.v
    }

    pub fn rows(&self) -> usize {
        self.u.nrows()
    }

    /// True until the first call to [`update_scalings`].
    pub fn is_fresh(&self) -> bool {
        self.fresh
    }
}

/// Keeps a column's relaxed transport objective from increasing.
///
/// After the regular iterations, a column whose objective is worse than at
/// its previous scalings keeps iterating (up to `max_iters` in total); if it
/// still has not caught up, the previous scalings are restored.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentGuard {
    pub lambda: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingOptions {
    pub sinkhorn_iters: usize,
    pub eps_div: f64,
    pub warm_start: bool,
    pub parallel: bool,
    pub chunk_size: usize,
    pub guard: Option<DescentGuard>,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            sinkhorn_iters: 25,
            eps_div: DEFAULT_EPS_DIV,
            warm_start: true,
            parallel: true,
            chunk_size: 64,
            guard: None,
        }
    }
}

/// Work done beyond the fixed iteration count.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScalingStats {
    pub extra_iters: usize,
    pub fallbacks: usize,
}

impl ScalingStats {
    fn merge(self, other: ScalingStats) -> ScalingStats {
        ScalingStats {
            extra_iters: self.extra_iters + other.extra_iters,
            fallbacks: self.fallbacks + other.fallbacks,
        }
    }
}

/// Per-column pieces of the relaxed transport objective.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ColumnTerms {
    /// `⟨C, T⟩`
    pub transport_cost: f64,
    /// `E(T) = -Σ T log T`
    pub entropy: f64,
    /// `KL(T1 || x̂)`, infinite when undefined
    pub kl_rows: f64,
    /// `KL(Tᵀ1 || x)`, infinite when undefined
    pub kl_cols: f64,
}

impl ColumnTerms {
    pub fn objective(&self, rho: f64, lambda: f64) -> f64 {
        self.transport_cost - self.entropy / rho + lambda * (self.kl_rows + self.kl_cols)
    }
}

pub(crate) fn kl_term(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        if b > 0.0 {
            a * (a / b).ln() - a + b
        } else {
            f64::INFINITY
        }
    } else {
        b
    }
}

pub(crate) fn xlogx(t: f64) -> f64 {
    if t > 0.0 {
        t * t.ln()
    } else {
        0.0
    }
}

/// Objective pieces of one column, from a transient `T = diag(u) K diag(v)`.
/// Reconstruction entries are floored at [`DEFAULT_EPS_DIV`] inside the KL.
pub fn column_terms(model: &CostModel, u: &[f64], v: &[f64], xhat: &[f64], x: &[f64]) -> ColumnTerms {
    let n = model.dim();
    let k = model.kernel();
    let c = model.cost();
    let mut rows = vec![0.0; n];
    let mut cols = vec![0.0; n];
    let mut terms = ColumnTerms::default();
    let mut neg_entropy = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = u[i] * k[[i, j]] * v[j];
            rows[i] += t;
            cols[j] += t;
            terms.transport_cost += c[[i, j]] * t;
            neg_entropy += xlogx(t);
        }
    }
    terms.entropy = -neg_entropy;
    terms.kl_rows = rows
        .iter()
        .zip(xhat)
        .map(|(&a, &b)| kl_term(a, b.max(DEFAULT_EPS_DIV)))
        .sum();
    terms.kl_cols = cols.iter().zip(x).map(|(&a, &b)| kl_term(a, b)).sum();
    terms
}

/// Materializes the plan of column `k`.
pub fn column_transport(scalings: &TransportScalings, model: &CostModel, k: usize) -> Array2<f64> {
    let u = scalings.u.column(k);
    let v = scalings.v.column(k);
    Array2::from_shape_fn(model.kernel().dim(), |(i, j)| u[i] * model.kernel()[[i, j]] * v[j])
}

struct ColumnKernel<'a> {
    n: usize,
    k: &'a [f64],
    kt: &'a [f64],
    phi: f64,
    eps: f64,
}

impl ColumnKernel<'_> {
    /// `v ← (x ⊘ Kᵀu)^Φ`
    fn v_step(&self, x: &[f64], u: &[f64], v: &mut [f64]) {
        for (j, vj) in v.iter_mut().enumerate() {
            *vj = if x[j] == 0.0 {
                0.0
            } else {
                let s: f64 = self.kt[j * self.n..(j + 1) * self.n]
                    .iter()
                    .zip(u)
                    .map(|(a, b)| a * b)
                    .sum();
                (x[j] / s.max(self.eps)).powf(self.phi)
            };
        }
    }

    /// `u ← x̂^Φ ⊘ (Kv)^Φ`
    fn u_step(&self, xhat: &[f64], v: &[f64], u: &mut [f64]) {
        for (i, ui) in u.iter_mut().enumerate() {
            *ui = if xhat[i] == 0.0 {
                0.0
            } else {
                let s: f64 = self.k[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum();
                (xhat[i] / s.max(self.eps)).powf(self.phi)
            };
        }
    }
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

#[allow(clippy::too_many_arguments)]
fn update_column(
    ck: &ColumnKernel<'_>,
    model: &CostModel,
    opts: &ScalingOptions,
    guard: Option<&DescentGuard>,
    x: &[f64],
    xhat: &[f64],
    u: &mut [f64],
    v: &mut [f64],
    mode: usize,
    column: usize,
) -> Result<ScalingStats> {
    let mut stats = ScalingStats::default();
    let previous = guard.map(|g| {
        let old = column_terms(model, u, v, xhat, x).objective(model.rho(), g.lambda);
        (old, u.to_vec(), v.to_vec())
    });
    if !opts.warm_start {
        u.fill(1.0);
    }
    let check = |u: &[f64], v: &[f64], iteration: usize| {
        if all_finite(u) && all_finite(v) {
            Ok(())
        } else {
            Err(SwiftError::NonFiniteScaling {
                mode,
                column,
                iteration,
            })
        }
    };
    for it in 0..opts.sinkhorn_iters {
        ck.v_step(x, u, v);
        ck.u_step(xhat, v, u);
        check(u, v, it)?;
    }
    if let (Some(g), Some((old, u0, v0))) = (guard, previous) {
        let bound = old + g.rel_tol * old.abs().max(1.0);
        let mut iters = opts.sinkhorn_iters;
        let mut current = column_terms(model, u, v, xhat, x).objective(model.rho(), g.lambda);
        while current > bound && iters < g.max_iters {
            ck.v_step(x, u, v);
            ck.u_step(xhat, v, u);
            check(u, v, iters)?;
            iters += 1;
            stats.extra_iters += 1;
            current = column_terms(model, u, v, xhat, x).objective(model.rho(), g.lambda);
        }
        if current > bound {
            u.copy_from_slice(&u0);
            v.copy_from_slice(&v0);
            stats.fallbacks += 1;
        }
    }
    Ok(stats)
}

fn column_major(m: ArrayView2<f64>) -> Vec<f64> {
    m.t().iter().copied().collect()
}

fn check_block(name: &str, m: &ArrayView2<f64>, scalings: &TransportScalings) -> Result<()> {
    if m.dim() != scalings.u.dim() {
        return Err(SwiftError::Shape(format!(
            "{name} block {:?} does not match scalings {:?}",
            m.dim(),
            scalings.u.dim()
        )));
    }
    Ok(())
}

/// Runs the alternating updates `V ← (X ⊘ KᵀU)^Φ`, `U ← X̂^Φ ⊘ (KV)^Φ` on
/// every listed column, `sinkhorn_iters` rounds each.
///
/// `x_cols` and `xhat_cols` hold the data and reconstruction restricted to
/// the columns of `scalings`.
pub fn update_scalings(
    x_cols: ArrayView2<f64>,
    xhat_cols: ArrayView2<f64>,
    model: &CostModel,
    scalings: &mut TransportScalings,
    opts: &ScalingOptions,
) -> Result<ScalingStats> {
    check_block("data", &x_cols, scalings)?;
    check_block("reconstruction", &xhat_cols, scalings)?;
    if model.dim() != scalings.rows() {
        return Err(SwiftError::Shape(format!(
            "cost model of size {} for {} rows",
            model.dim(),
            scalings.rows()
        )));
    }
    let n = scalings.rows();
    let ncols = scalings.columns.len();
    if ncols == 0 {
        scalings.fresh = false;
        return Ok(ScalingStats::default());
    }
    let k = model.kernel().as_standard_layout().into_owned();
    let kt = model.kernel().t().as_standard_layout().into_owned();
    let ck = ColumnKernel {
        n,
        k: k.as_slice().expect("standard layout"),
        kt: kt.as_slice().expect("standard layout"),
        phi: scalings.phi,
        eps: opts.eps_div,
    };
    let guard = if scalings.fresh { None } else { opts.guard.as_ref() };
    let x = column_major(x_cols);
    let xh = column_major(xhat_cols);
    let chunk = opts.chunk_size.max(1) * n;
    let mode = scalings.mode;
    let columns = &scalings.columns;
    let u = scalings
        .u
        .as_slice_memory_order_mut()
        .expect("scalings are contiguous");
    let v = scalings
        .v
        .as_slice_memory_order_mut()
        .expect("scalings are contiguous");

    let run = |t: usize, uc: &mut [f64], vc: &mut [f64]| -> Result<ScalingStats> {
        let first = t * chunk;
        let mut stats = ScalingStats::default();
        for (c, (uj, vj)) in uc.chunks_mut(n).zip(vc.chunks_mut(n)).enumerate() {
            let off = first + c * n;
            let col = off / n;
            stats = stats.merge(update_column(
                &ck,
                model,
                opts,
                guard,
                &x[off..off + n],
                &xh[off..off + n],
                uj,
                vj,
                mode,
                columns[col],
            )?);
        }
        Ok(stats)
    };

    let results: Vec<Result<ScalingStats>> = if opts.parallel {
        u.par_chunks_mut(chunk)
            .zip(v.par_chunks_mut(chunk))
            .enumerate()
            .map(|(t, (uc, vc))| run(t, uc, vc))
            .collect()
    } else {
        u.chunks_mut(chunk)
            .zip(v.chunks_mut(chunk))
            .enumerate()
            .map(|(t, (uc, vc))| run(t, uc, vc))
            .collect()
    };
    let mut total = ScalingStats::default();
    for r in results {
        total = total.merge(r?);
    }
    scalings.fresh = false;
    Ok(total)
}

/// One half-update `V ← (X ⊘ KᵀU)^Φ` on every column.
pub fn half_step_v(
    x_cols: ArrayView2<f64>,
    model: &CostModel,
    scalings: &mut TransportScalings,
    eps_div: f64,
) -> Result<()> {
    check_block("data", &x_cols, scalings)?;
    let k = model.kernel().as_standard_layout().into_owned();
    let kt = model.kernel().t().as_standard_layout().into_owned();
    let ck = ColumnKernel {
        n: scalings.rows(),
        k: k.as_slice().expect("standard layout"),
        kt: kt.as_slice().expect("standard layout"),
        phi: scalings.phi,
        eps: eps_div,
    };
    for j in 0..scalings.columns.len() {
        let x: Vec<f64> = x_cols.column(j).to_vec();
        let u: Vec<f64> = scalings.u.column(j).to_vec();
        let mut v = vec![0.0; scalings.rows()];
        ck.v_step(&x, &u, &mut v);
        scalings.v.column_mut(j).assign(&ndarray::ArrayView1::from(&v));
    }
    Ok(())
}

/// One half-update `U ← X̂^Φ ⊘ (KV)^Φ` on every column.
pub fn half_step_u(
    xhat_cols: ArrayView2<f64>,
    model: &CostModel,
    scalings: &mut TransportScalings,
    eps_div: f64,
) -> Result<()> {
    check_block("reconstruction", &xhat_cols, scalings)?;
    let k = model.kernel().as_standard_layout().into_owned();
    let kt = model.kernel().t().as_standard_layout().into_owned();
    let ck = ColumnKernel {
        n: scalings.rows(),
        k: k.as_slice().expect("standard layout"),
        kt: kt.as_slice().expect("standard layout"),
        phi: scalings.phi,
        eps: eps_div,
    };
    for j in 0..scalings.columns.len() {
        let xh: Vec<f64> = xhat_cols.column(j).to_vec();
        let v: Vec<f64> = scalings.v.column(j).to_vec();
        let mut u = vec![0.0; scalings.rows()];
        ck.u_step(&xh, &v, &mut u);
        scalings.u.column_mut(j).assign(&ndarray::ArrayView1::from(&u));
    }
    Ok(())
}

/// Row marginals of the implicit plans, `Δ = U ∗ (K V)`, one column per
/// listed column.
pub fn delta(scalings: &TransportScalings, model: &CostModel) -> Array2<f64> {
    &scalings.u * &model.kernel().dot(&scalings.v)
}

/// Column marginals of the implicit plans, `Ψ = V ∗ (Kᵀ U)`.
pub fn psi(scalings: &TransportScalings, model: &CostModel) -> Array2<f64> {
    &scalings.v * &model.kernel().t().dot(&scalings.u)
}

/// `Δ` scattered into the full `I_n × I_(-n)` unfolding (zero elsewhere).
pub fn delta_full(scalings: &TransportScalings, model: &CostModel, n_cols: usize) -> Array2<f64> {
    let d = delta(scalings, model);
    let mut out = Array2::zeros((scalings.rows(), n_cols));
    for (k, &c) in scalings.columns.iter().enumerate() {
        out.column_mut(c).assign(&d.column(k));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::build_kernel;
    use ndarray::array;

    fn opts(iters: usize) -> ScalingOptions {
        ScalingOptions {
            sinkhorn_iters: iters,
            parallel: false,
            ..ScalingOptions::default()
        }
    }

    #[test]
    fn balanced_limit_matches_marginals() {
        let model = build_kernel(array![[0.0, 0.4, 0.9], [0.4, 0.0, 0.6], [0.9, 0.6, 0.0]], 2.0)
            .unwrap();
        let x = array![[1.0, 0.0], [2.0, 3.0], [0.5, 1.0]];
        let xh = array![[0.7, 1.5], [1.1, 0.2], [2.0, 2.0]];
        let mut s = TransportScalings::new(0, 3, vec![0, 4], 1.0);
        update_scalings(x.view(), xh.view(), &model, &mut s, &opts(5)).unwrap();
        let d = delta(&s, &model);
        for (a, b) in d.iter().zip(xh.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
        half_step_v(x.view(), &model, &mut s, DEFAULT_EPS_DIV).unwrap();
        let p = psi(&s, &model);
        for (a, b) in p.iter().zip(x.iter()) {
            assert!((a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn one_by_one_delta_is_scalar_product() {
        let model = build_kernel(array![[0.0]], 1.0).unwrap();
        let s = TransportScalings::from_parts(0, 0.5, vec![0], array![[2.0]], array![[3.0]])
            .unwrap();
        let d = delta(&s, &model);
        assert!((d[[0, 0]] - 2.0 * (-1.0f64).exp() * 3.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_kernel_equal_scalings_give_equal_marginals() {
        let model = build_kernel(array![[0.0, 0.3], [0.3, 0.0]], 3.0).unwrap();
        let u = array![[1.5, 0.2], [0.7, 2.0]];
        let s = TransportScalings::from_parts(0, 0.5, vec![1, 2], u.clone(), u).unwrap();
        let d = delta(&s, &model);
        let p = psi(&s, &model);
        for (a, b) in d.iter().zip(p.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_data_column_gives_zero_plan() {
        let model = build_kernel(array![[0.0, 1.0], [1.0, 0.0]], 1.0).unwrap();
        let x = array![[0.0], [0.0]];
        let xh = array![[1.0], [2.0]];
        let mut s = TransportScalings::new(0, 2, vec![0], 0.5);
        update_scalings(x.view(), xh.view(), &model, &mut s, &opts(3)).unwrap();
        assert!(s.u().iter().all(|v| v.is_finite()));
        assert!(delta(&s, &model).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let model = build_kernel(array![[0.0, 1.0], [1.0, 0.0]], 1.0).unwrap();
        let mut s = TransportScalings::new(0, 2, vec![0], 0.5);
        let bad = Array2::<f64>::ones((2, 2));
        assert!(update_scalings(bad.view(), bad.view(), &model, &mut s, &opts(1)).is_err());
    }

    #[test]
    fn guard_never_increases_column_objective() {
        let model = build_kernel(array![[0.0, 0.2, 0.7], [0.2, 0.0, 0.5], [0.7, 0.5, 0.0]], 50.0)
            .unwrap();
        let lambda = 1.0;
        let phi = 50.0 / 51.0;
        let x = array![[1.0], [0.0], [3.0]];
        let mut xh = array![[0.5], [1.0], [2.0]];
        let guard = DescentGuard {
            lambda,
            max_iters: 500,
            rel_tol: 0.0,
        };
        let o = ScalingOptions {
            sinkhorn_iters: 2,
            parallel: false,
            guard: Some(guard),
            ..ScalingOptions::default()
        };
        let mut s = TransportScalings::new(0, 3, vec![0], phi);
        update_scalings(x.view(), xh.view(), &model, &mut s, &o).unwrap();
        for step in 0..10 {
            xh[[step % 3, 0]] *= 1.7;
            let before = column_terms(
                &model,
                s.u().as_slice_memory_order().unwrap(),
                s.v().as_slice_memory_order().unwrap(),
                xh.as_slice_memory_order().unwrap(),
                x.as_slice_memory_order().unwrap(),
            )
            .objective(50.0, lambda);
            update_scalings(x.view(), xh.view(), &model, &mut s, &o).unwrap();
            let after = column_terms(
                &model,
                s.u().as_slice_memory_order().unwrap(),
                s.v().as_slice_memory_order().unwrap(),
                xh.as_slice_memory_order().unwrap(),
                x.as_slice_memory_order().unwrap(),
            )
            .objective(50.0, lambda);
            assert!(after <= before, "{after} > {before}");
        }
    }
}
