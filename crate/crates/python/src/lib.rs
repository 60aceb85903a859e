//! Python module `swift_py`. Matrices cross the boundary as lists of rows.

use ndarray::{Array1, Array2};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use swift_core::harness::{
    build_cost_cosine, build_cost_one_identity, build_cost_random, inject_noise_bernoulli,
    inject_noise_poisson, load_tensor, save_tensor,
};
use swift_core::ot::{build_kernel, CostModel};
use swift_core::solver::{self, DenominatorScale, FitTrace};
use swift_core::{ErrorCategory, FactorSet, SparseTensor, SwiftError, WassersteinMode};

fn err(e: SwiftError) -> PyErr {
    match e.category() {
        ErrorCategory::Input => PyValueError::new_err(e.to_string()),
        ErrorCategory::Numerical => PyRuntimeError::new_err(e.to_string()),
        ErrorCategory::Io => PyOSError::new_err(e.to_string()),
    }
}

fn to_rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    let n = rows.len();
    Array2::from_shape_vec((n, cols), rows.into_iter().flatten().collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyclass(name = "Tensor", module = "swift_py", from_py_object)]
#[derive(Clone)]
struct PyTensor {
    inner: SparseTensor,
}

#[pymethods]
impl PyTensor {
    #[new]
    fn new(shape: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> PyResult<Self> {
        Ok(PyTensor {
            inner: SparseTensor::new(shape, entries).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        Ok(PyTensor {
            inner: load_tensor(&path).map_err(err)?,
        })
    }

    fn save(&self, path: std::path::PathBuf) -> PyResult<()> {
        save_tensor(&path, &self.inner).map_err(err)
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape().to_vec()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    fn entries(&self) -> Vec<(Vec<usize>, f64)> {
        self.inner.iter().map(|(i, v)| (i.to_vec(), v)).collect()
    }

    fn get(&self, index: Vec<usize>) -> f64 {
        self.inner.get(&index)
    }

    /// Column-major dense values (first mode fastest).
    fn to_dense(&self) -> Vec<f64> {
        self.inner.to_dense()
    }

    fn __repr__(&self) -> String {
        format!("Tensor(shape={:?}, nnz={})", self.inner.shape(), self.inner.nnz())
    }
}

#[pyclass(name = "Factors", module = "swift_py", from_py_object)]
#[derive(Clone)]
struct PyFactors {
    inner: FactorSet,
}

#[pymethods]
impl PyFactors {
    #[new]
    fn new(factors: Vec<Vec<Vec<f64>>>) -> PyResult<Self> {
        let mats = factors.into_iter().map(from_rows).collect::<PyResult<Vec<_>>>()?;
        Ok(PyFactors {
            inner: FactorSet::new(mats).map_err(err)?,
        })
    }

    #[getter]
    fn rank(&self) -> usize {
        self.inner.rank()
    }

    #[getter]
    fn shape(&self) -> Vec<usize> {
        self.inner.shape()
    }

    fn factor(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        self.inner
            .factors()
            .get(mode)
            .map(to_rows)
            .ok_or_else(|| PyValueError::new_err(format!("no factor {mode}")))
    }

    fn reconstruct_mode(&self, mode: usize) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&self.inner.reconstruct_mode(mode).map_err(err)?))
    }

    fn __repr__(&self) -> String {
        format!("Factors(shape={:?}, rank={})", self.inner.shape(), self.inner.rank())
    }
}

#[pyclass(name = "SolverConfig", module = "swift_py", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyConfig {
    rank: usize,
    rho: f64,
    lambda_: f64,
    outer_iters: usize,
    sinkhorn_iters: usize,
    seed: u64,
    warm_start: bool,
    parallel: bool,
    denominator: String,
    drop_zero_columns: bool,
    descent_guard: bool,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (rank=5, rho=50.0, lambda_=1.0, outer_iters=50, sinkhorn_iters=25, seed=0,
        warm_start=true, parallel=true, denominator="stacked".to_string(),
        drop_zero_columns=true, descent_guard=true))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        rank: usize,
        rho: f64,
        lambda_: f64,
        outer_iters: usize,
        sinkhorn_iters: usize,
        seed: u64,
        warm_start: bool,
        parallel: bool,
        denominator: String,
        drop_zero_columns: bool,
        descent_guard: bool,
    ) -> Self {
        PyConfig {
            rank,
            rho,
            lambda_,
            outer_iters,
            sinkhorn_iters,
            seed,
            warm_start,
            parallel,
            denominator,
            drop_zero_columns,
            descent_guard,
        }
    }
}

impl PyConfig {
    fn to_core(&self) -> PyResult<solver::SolverConfig> {
        let c = solver::SolverConfig {
            rank: self.rank,
            rho: self.rho,
            lambda: self.lambda_,
            outer_iters: self.outer_iters,
            sinkhorn_iters: self.sinkhorn_iters,
            seed: self.seed,
            warm_start: self.warm_start,
            parallel: self.parallel,
            denominator_scale: self.denominator.parse::<DenominatorScale>().map_err(err)?,
            drop_zero_columns: self.drop_zero_columns,
            descent_guard: self.descent_guard,
            ..solver::SolverConfig::default()
        };
        c.validate().map_err(err)?;
        Ok(c)
    }
}

/// Cost models from explicit matrices, or cosine costs of `tensor` when absent.
fn models(tensor: &SparseTensor, costs: Option<Vec<Vec<Vec<f64>>>>, rho: f64) -> PyResult<Vec<CostModel>> {
    let mats = match costs {
        Some(c) => c.into_iter().map(from_rows).collect::<PyResult<Vec<_>>>()?,
        None => (0..tensor.order())
            .map(|n| build_cost_cosine(tensor, n))
            .collect::<Result<Vec<_>, _>>()
            .map_err(err)?,
    };
    mats.into_iter()
        .map(|m| build_kernel(m, rho).map_err(err))
        .collect()
}

fn objectives(trace: &FitTrace) -> Vec<f64> {
    trace.objectives()
}

/// Fits CP factors; returns `(factors, objective_per_iteration)`.
#[pyfunction]
#[pyo3(signature = (tensor, config, costs=None))]
fn fit(
    py: Python<'_>,
    tensor: &PyTensor,
    config: &PyConfig,
    costs: Option<Vec<Vec<Vec<f64>>>>,
) -> PyResult<(PyFactors, Vec<f64>)> {
    let c = config.to_core()?;
    let m = models(&tensor.inner, costs, c.rho)?;
    let t = tensor.inner.clone();
    let out = py.detach(move || solver::fit(&t, &m, &c)).map_err(err)?;
    Ok((PyFactors { inner: out.factors }, objectives(&out.trace)))
}

/// Reference solver for third-order tensors with explicit Kronecker updates.
#[pyfunction]
#[pyo3(signature = (tensor, config, costs=None))]
fn fit_direct(
    py: Python<'_>,
    tensor: &PyTensor,
    config: &PyConfig,
    costs: Option<Vec<Vec<Vec<f64>>>>,
) -> PyResult<(PyFactors, Vec<f64>)> {
    let c = config.to_core()?;
    let m = models(&tensor.inner, costs, c.rho)?;
    let t = tensor.inner.clone();
    let out = py.detach(move || solver::fit_direct(&t, &m, &c)).map_err(err)?;
    Ok((PyFactors { inner: out.factors }, objectives(&out.trace)))
}

/// Fits a new mode-0 factor with the other trained factors held fixed.
#[pyfunction]
#[pyo3(signature = (tensor, trained, config, costs=None))]
fn project(
    py: Python<'_>,
    tensor: &PyTensor,
    trained: &PyFactors,
    config: &PyConfig,
    costs: Option<Vec<Vec<Vec<f64>>>>,
) -> PyResult<(Vec<Vec<f64>>, Vec<f64>)> {
    let c = config.to_core()?;
    let m = models(&tensor.inner, costs, c.rho)?;
    let t = tensor.inner.clone();
    let f = trained.inner.clone();
    let p = py.detach(move || solver::project(&t, &f, &m, &c)).map_err(err)?;
    Ok((to_rows(&p.factor), objectives(&p.trace)))
}

/// Tensor Wasserstein distance; returns `(per_mode, total)`.
#[pyfunction]
#[pyo3(signature = (a, b, costs, mode="exact", rho=50.0, iters=200, normalize=false))]
fn wasserstein(
    a: &PyTensor,
    b: &PyTensor,
    costs: Vec<Vec<Vec<f64>>>,
    mode: &str,
    rho: f64,
    iters: usize,
    normalize: bool,
) -> PyResult<(Vec<f64>, f64)> {
    let m = models(&a.inner, Some(costs), rho)?;
    let wmode = match mode {
        "exact" => WassersteinMode::Exact,
        "entropic" => WassersteinMode::Entropic { iters },
        other => return Err(PyValueError::new_err(format!("unknown mode {other:?}"))),
    };
    let r = swift_core::wasserstein_tensor(&a.inner, &b.inner, &m, wmode, normalize).map_err(err)?;
    Ok((r.per_mode, r.total))
}

/// Unregularized transport between two histograms; returns `(plan, cost)`.
#[pyfunction]
fn exact_ot(a: Vec<f64>, b: Vec<f64>, cost: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, f64)> {
    let t = swift_core::exact_ot(&Array1::from(a), &Array1::from(b), &from_rows(cost)?).map_err(err)?;
    Ok((to_rows(&t.plan), t.cost))
}

#[pyfunction]
fn cost_cosine(tensor: &PyTensor, mode: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(to_rows(&build_cost_cosine(&tensor.inner, mode).map_err(err)?))
}

#[pyfunction]
fn cost_identity(dim: usize) -> Vec<Vec<f64>> {
    to_rows(&build_cost_one_identity(dim))
}

#[pyfunction]
fn cost_random(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    to_rows(&build_cost_random(dim, seed))
}

/// Noise injection into zero cells (`model` is `bernoulli` or `poisson`).
#[pyfunction]
fn inject_noise(tensor: &PyTensor, model: &str, p: f64, seed: u64) -> PyResult<PyTensor> {
    let out = match model {
        "bernoulli" => inject_noise_bernoulli(&tensor.inner, p, seed),
        "poisson" => inject_noise_poisson(&tensor.inner, p, seed),
        other => return Err(PyValueError::new_err(format!("unknown noise model {other:?}"))),
    }
    .map_err(err)?;
    Ok(PyTensor { inner: out.tensor })
}

#[pyfunction]
fn reconstruction_error(tensor: &PyTensor, factors: &PyFactors) -> PyResult<f64> {
    swift_core::reconstruction_error(&tensor.inner, &factors.inner).map_err(err)
}

#[pymodule]
fn swift_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyFactors>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(fit_direct, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein, m)?)?;
    m.add_function(wrap_pyfunction!(exact_ot, m)?)?;
    m.add_function(wrap_pyfunction!(cost_cosine, m)?)?;
    m.add_function(wrap_pyfunction!(cost_identity, m)?)?;
    m.add_function(wrap_pyfunction!(cost_random, m)?)?;
    m.add_function(wrap_pyfunction!(inject_noise, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruction_error, m)?)?;
    Ok(())
}
