//! Third-order reference solver that updates each factor through an explicit
//! vectorized Kronecker operator instead of the Π rearrangement.

use ndarray::{concatenate, s, Array1, Array2, Axis};

use super::engine::Engine;
use super::fit::{initial_factors, run_sweeps, FactorStep, FitOutput};
use super::SolverConfig;
use crate::error::{Result, SwiftError};
use crate::ot::CostModel;
use crate::tensor::{check_mode, khatri_rao, FactorSet, SparseTensor};

/// Largest extent accepted by [`fit_direct`].
pub const MAX_DIRECT_DIM: usize = 10;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let v = a[[i, j]];
            if v != 0.0 {
                out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc])
                    .assign(&(b * v));
            }
        }
    }
    out
}

/// Column-major vectorization.
pub fn vec_col(m: &Array2<f64>) -> Array1<f64> {
    m.t().iter().copied().collect()
}

/// Inverse of [`vec_col`].
pub fn unvec_col(v: &Array1<f64>, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |(i, j)| v[j * rows + i])
}

fn eye(n: usize) -> Array2<f64> {
    Array2::eye(n)
}

fn kr(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    khatri_rao(a, b).expect("column counts agree")
}

/// `A (I_R ⊗ 1_{1×m})`: every column of `A` repeated `m` times.
fn repeat_columns(a: &Array2<f64>, m: usize) -> Array2<f64> {
    let ones = Array2::ones((1, m));
    a.dot(&kron(&eye(a.ncols()), &ones))
}

/// The stacked operator `M` with `M vec(A_n)` equal to the three
/// reconstructions, each vectorized so that `A_n` sits in the same position.
pub fn direct_operator(factors: &FactorSet, mode: usize) -> Result<Array2<f64>> {
    if factors.order() != 3 {
        return Err(SwiftError::Shape(format!(
            "direct operator needs a third-order factorization, got order {}",
            factors.order()
        )));
    }
    check_mode(mode, 3)?;
    let (a1, a2, a3) = (factors.factor(0), factors.factor(1), factors.factor(2));
    let (i1, i2, i3) = (a1.nrows(), a2.nrows(), a3.nrows());
    let r = factors.rank();
    let ir = eye(r);
    let blocks = match mode {
        0 => [
            kron(&kr(a3, a2), &eye(i1)),
            kron(a2, &eye(i3 * i1)).dot(&kron(&kr(&ir, a3), &eye(i1))),
            kron(a3, &eye(i2 * i1)).dot(&kron(&kr(&ir, a2), &eye(i1))),
        ],
        1 => [
            kron(a1, &eye(i2 * i3)).dot(&kron(&kr(&ir, a3), &eye(i2))),
            kron(&kr(a3, a1), &eye(i2)),
            kron(a3, &eye(i1 * i2)).dot(&kr(&eye(i2 * r), &repeat_columns(a1, i2))),
        ],
        _ => [
            kron(a1, &eye(i3 * i2)).dot(&kr(&eye(i3 * r), &repeat_columns(a2, i3))),
            kron(a2, &eye(i3 * i1)).dot(&kr(&eye(i3 * r), &repeat_columns(a1, i3))),
            kron(&kr(a2, a1), &eye(i3)),
        ],
    };
    Ok(concatenate(Axis(0), &[blocks[0].view(), blocks[1].view(), blocks[2].view()])
        .expect("blocks share the column count"))
}

/// Stacked targets: the mode-n marginal as is, the other two transposed,
/// each vectorized column-major.
pub fn direct_targets(deltas: &[Array2<f64>], mode: usize) -> Result<Array1<f64>> {
    if deltas.len() != 3 {
        return Err(SwiftError::Shape(format!(
            "direct targets need 3 marginal matrices, got {}",
            deltas.len()
        )));
    }
    check_mode(mode, 3)?;
    let parts: Vec<Array1<f64>> = deltas
        .iter()
        .enumerate()
        .map(|(i, d)| {
            if i == mode {
                vec_col(d)
            } else {
                vec_col(&d.t().to_owned())
            }
        })
        .collect();
    Ok(concatenate(Axis(0), &[parts[0].view(), parts[1].view(), parts[2].view()])
        .expect("one-dimensional"))
}

struct KroneckerStep;

impl FactorStep for KroneckerStep {
    fn update(
        &mut self,
        engine: &Engine<'_>,
        factors: &FactorSet,
        deltas: &[Array2<f64>],
        mode: usize,
    ) -> Result<(Array2<f64>, usize)> {
        let config = engine.config;
        let full: Vec<Array2<f64>> = deltas
            .iter()
            .zip(&engine.modes)
            .map(|(d, m)| {
                let mut out = Array2::zeros((m.layout.rows(), m.layout.n_cols()));
                for (k, &c) in m.columns.iter().enumerate() {
                    out.column_mut(c).assign(&d.column(k));
                }
                out
            })
            .collect();
        let m = direct_operator(factors, mode)?;
        let y = direct_targets(&full, mode)?;
        let a = factors.factor(mode);
        let x = vec_col(a);
        let mx = m.dot(&x);
        let mut floored = 0;
        let q = Array1::from_shape_fn(y.len(), |k| {
            if y[k] == 0.0 {
                0.0
            } else if mx[k] < config.eps_div {
                floored += 1;
                y[k] / config.eps_div
            } else {
                y[k] / mx[k]
            }
        });
        let numer = m.t().dot(&q);
        let denom = m.sum_axis(Axis(0)) * (config.denominator_factor(3) / 3.0);
        let next = Array1::from_shape_fn(x.len(), |k| {
            if x[k] == 0.0 || denom[k] == 0.0 {
                0.0
            } else {
                x[k] * numer[k] / denom[k]
            }
        });
        Ok((unvec_col(&next, a.nrows(), a.ncols()), floored))
    }
}

/// Fits a third-order tensor with the explicit Kronecker factor updates.
/// Transport problems are solved on every column.
pub fn fit_direct(tensor: &SparseTensor, costs: &[CostModel], config: &SolverConfig) -> Result<FitOutput> {
    config.validate()?;
    if tensor.order() != 3 {
        return Err(SwiftError::Shape(format!(
            "direct solver supports third-order tensors only, got order {}",
            tensor.order()
        )));
    }
    if let Some(&d) = tensor.shape().iter().find(|&&d| d > MAX_DIRECT_DIM) {
        return Err(SwiftError::TooLarge(format!(
            "extent {d} exceeds the direct solver limit {MAX_DIRECT_DIM}"
        )));
    }
    let config = SolverConfig {
        drop_zero_columns: false,
        ..config.clone()
    };
    let init = initial_factors(tensor.shape(), &config)?;
    let mut engine = Engine::new(tensor, costs, &config)?;
    let (factors, trace) = run_sweeps(&mut engine, init, &[0, 1, 2], &mut KroneckerStep)?;
    Ok(FitOutput {
        factors,
        trace,
        scalings: engine.scalings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.0..1.0))
    }

    fn close(a: &Array1<f64>, b: &Array1<f64>, tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn kron_small_case() {
        let a = ndarray::array![[1.0, 2.0]];
        let b = ndarray::array![[0.0], [3.0]];
        assert_eq!(kron(&a, &b), ndarray::array![[0.0, 0.0], [3.0, 6.0]]);
    }

    #[test]
    fn vec_of_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (c, d, e) = (random(3, 4, &mut rng), random(4, 2, &mut rng), random(2, 5, &mut rng));
        let lhs = kron(&e.t().to_owned(), &c).dot(&vec_col(&d));
        close(&lhs, &vec_col(&c.dot(&d).dot(&e)), 1e-12);
    }

    #[test]
    fn operator_reproduces_reconstructions() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let f = FactorSet::random(&[4, 3, 5], 2, &mut rng).unwrap();
        let recon: Vec<_> = (0..3).map(|i| f.reconstruct_mode(i).unwrap()).collect();
        for mode in 0..3 {
            let m = direct_operator(&f, mode).unwrap();
            let lhs = m.dot(&vec_col(f.factor(mode)));
            close(&lhs, &direct_targets(&recon, mode).unwrap(), 1e-12);
        }
    }

    #[test]
    fn rejects_wrong_order_and_size() {
        let t = SparseTensor::new(vec![2, 2], vec![(vec![0, 0], 1.0)]).unwrap();
        assert!(fit_direct(&t, &[], &SolverConfig::default()).is_err());
        let t = SparseTensor::new(vec![11, 2, 2], vec![(vec![0, 0, 0], 1.0)]).unwrap();
        assert!(matches!(
            fit_direct(&t, &[], &SolverConfig::default()),
            Err(SwiftError::TooLarge(_))
        ));
    }
}
