use ndarray::{Array2, ShapeBuilder};
use rand::Rng;

use super::{check_mode, UnfoldLayout};
use crate::error::{Result, SwiftError};

/// Column-wise Kronecker product `a ⊙ b`; row `p * I_b + q` of column `r`
/// is `a[p, r] * b[q, r]`.
pub fn khatri_rao(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != b.ncols() {
        return Err(SwiftError::Shape(format!(
            "Khatri-Rao needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let (ia, ib, r) = (a.nrows(), b.nrows(), a.ncols());
    Ok(Array2::from_shape_fn((ia * ib, r), |(row, col)| {
        a[[row / ib, col]] * b[[row % ib, col]]
    }))
}

/// The N nonnegative CP factor matrices `A_n` (`I_n × R`).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorSet {
    rank: usize,
    factors: Vec<Array2<f64>>,
}

impl FactorSet {
    pub fn new(factors: Vec<Array2<f64>>) -> Result<Self> {
        if factors.len() < 2 {
            return Err(SwiftError::Shape(format!(
                "need at least 2 factor matrices, got {}",
                factors.len()
            )));
        }
        let rank = factors[0].ncols();
        if rank == 0 {
            return Err(SwiftError::Shape("rank must be positive".into()));
        }
        for (n, a) in factors.iter().enumerate() {
            if a.ncols() != rank {
                return Err(SwiftError::Shape(format!(
                    "factor {n} has {} columns, expected rank {rank}",
                    a.ncols()
                )));
            }
            if a.nrows() == 0 {
                return Err(SwiftError::Shape(format!("factor {n} has no rows")));
            }
            if let Some(v) = a.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(SwiftError::Shape(format!(
                    "factor {n} has invalid entry {v}"
                )));
            }
        }
        Ok(FactorSet { rank, factors })
    }

    /// Entries drawn i.i.d. uniform on `[0.1, 1.1)`.
    pub fn random<R: Rng + ?Sized>(shape: &[usize], rank: usize, rng: &mut R) -> Result<Self> {
        let factors = shape
            .iter()
            .map(|&d| Array2::from_shape_simple_fn((d, rank), || rng.random_range(0.1..1.1)))
            .collect();
        FactorSet::new(factors)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.factors.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.factors.iter().map(|a| a.nrows()).collect()
    }

    pub fn factor(&self, mode: usize) -> &Array2<f64> {
        &self.factors[mode]
    }

    pub fn factors(&self) -> &[Array2<f64>] {
        &self.factors
    }

    pub fn into_factors(self) -> Vec<Array2<f64>> {
        self.factors
    }

    /// Replaces factor `mode`; the new matrix must keep the shape.
    pub fn set_factor(&mut self, mode: usize, a: Array2<f64>) -> Result<()> {
        check_mode(mode, self.order())?;
        if a.dim() != self.factors[mode].dim() {
            return Err(SwiftError::Shape(format!(
                "factor {mode} must stay {:?}, got {:?}",
                self.factors[mode].dim(),
                a.dim()
            )));
        }
        self.factors[mode] = a;
        Ok(())
    }

    /// `A_⊙^{(-n)} = A_{N-1} ⊙ .. ⊙ A_{n+1} ⊙ A_{n-1} ⊙ .. ⊙ A_0`, shape `I_(-n) × R`.
    pub fn khatri_rao_excluding(&self, mode: usize) -> Result<Array2<f64>> {
        check_mode(mode, self.order())?;
        let mut acc = Array2::ones((1, self.rank));
        for k in (0..self.order()).rev() {
            if k != mode {
                acc = khatri_rao(&acc, &self.factors[k])?;
            }
        }
        Ok(acc)
    }

    /// Dense `X̂_(n) = A_n (A_⊙^{(-n)})ᵀ`.
    pub fn reconstruct_mode(&self, mode: usize) -> Result<Array2<f64>> {
        let kr = self.khatri_rao_excluding(mode)?;
        Ok(self.factors[mode].dot(&kr.t()))
    }

    /// Columns `cols` of `X̂_(n)` as an `I_n × cols.len()` column-major matrix.
    pub fn reconstruct_columns(&self, mode: usize, cols: &[usize]) -> Result<Array2<f64>> {
        let shape = self.shape();
        let layout = UnfoldLayout::new(&shape, mode)?;
        let a = &self.factors[mode];
        let mut out = Array2::zeros((a.nrows(), cols.len()).f());
        let mut idx = vec![0; shape.len()];
        let mut weights = vec![0.0; self.rank];
        for (k, &c) in cols.iter().enumerate() {
            if c >= layout.n_cols() {
                return Err(SwiftError::Shape(format!(
                    "column {c} out of range for mode {mode}"
                )));
            }
            layout.decode_into(0, c, &mut idx);
            weights.fill(1.0);
            for (m, f) in self.factors.iter().enumerate() {
                if m != mode {
                    for (w, &v) in weights.iter_mut().zip(f.row(idx[m])) {
                        *w *= v;
                    }
                }
            }
            for (i, row) in a.rows().into_iter().enumerate() {
                out[[i, k]] = row.iter().zip(&weights).map(|(x, w)| x * w).sum();
            }
        }
        Ok(out)
    }

    /// Value of the reconstruction at one cell.
    pub fn value_at(&self, index: &[usize]) -> f64 {
        (0..self.rank)
            .map(|r| {
                self.factors
                    .iter()
                    .zip(index)
                    .map(|(f, &i)| f[[i, r]])
                    .product::<f64>()
            })
            .sum()
    }

    /// Sum of all entries of the reconstruction, `Σ_r Π_n colsum(A_n)_r`.
    pub fn reconstruction_sum(&self) -> f64 {
        let sums: Vec<_> = self.factors.iter().map(|f| f.sum_axis(ndarray::Axis(0))).collect();
        (0..self.rank)
            .map(|r| sums.iter().map(|s| s[r]).product::<f64>())
            .sum()
    }
}
