//! Sparse tensors, mode-n unfoldings, Khatri-Rao products and CP factors.
//!
//! All indices are 0-based. The mode-n unfolding maps the cell
//! `(i_0, .., i_{N-1})` to row `i_n` and column
//! `sum_{k != n} i_k * prod_{m < k, m != n} I_m`, so the lowest remaining
//! mode varies fastest. [`FactorSet::khatri_rao_excluding`] uses the matching
//! ordering `A_{N-1} ⊙ .. ⊙ A_{n+1} ⊙ A_{n-1} ⊙ .. ⊙ A_0`, which makes
//! `X̂_(n) = A_n (A_⊙^{(-n)})ᵀ` hold exactly.

mod factors;
mod unfold;

pub use factors::{khatri_rao, FactorSet};
pub use unfold::{
    fold_dense, matricize, pi_accumulate_columns, pi_rearrange, tensorize, unfold_dense,
    MatricizedView, UnfoldLayout,
};

use crate::error::{Result, SwiftError};

/// An N-th order nonnegative tensor in coordinate form.
///
/// Entries are kept sorted by their column-major linear index (first mode
/// fastest). Only strictly positive values are stored.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseTensor {
    shape: Vec<usize>,
    coords: Vec<usize>,
    values: Vec<f64>,
    linear: Vec<usize>,
}

impl SparseTensor {
    /// Builds a tensor from `(index, value)` pairs.
    ///
    /// Zero values are dropped. Negative or non-finite values, indices out
    /// of bounds and repeated coordinates are rejected.
    pub fn new(shape: Vec<usize>, entries: Vec<(Vec<usize>, f64)>) -> Result<Self> {
        validate_shape(&shape)?;
        let order = shape.len();
        let mut keyed = Vec::with_capacity(entries.len());
        for (index, value) in entries {
            if index.len() != order || index.iter().zip(&shape).any(|(&i, &d)| i >= d) {
                return Err(SwiftError::OutOfBounds { index, shape });
            }
            if !value.is_finite() {
                return Err(SwiftError::InvalidValue {
                    index,
                    value,
                    reason: "not finite",
                });
            }
            if value < 0.0 {
                return Err(SwiftError::InvalidValue {
                    index,
                    value,
                    reason: "negative",
                });
            }
            if value == 0.0 {
                continue;
            }
            let lin = linear_index(&shape, &index);
            keyed.push((lin, index, value));
        }
        keyed.sort_by_key(|(lin, _, _)| *lin);
        for pair in keyed.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(SwiftError::DuplicateCoordinate(pair[1].1.clone()));
            }
        }
        let mut coords = Vec::with_capacity(keyed.len() * order);
        let mut values = Vec::with_capacity(keyed.len());
        let mut linear = Vec::with_capacity(keyed.len());
        for (lin, index, value) in keyed {
            coords.extend_from_slice(&index);
            values.push(value);
            linear.push(lin);
        }
        Ok(SparseTensor {
            shape,
            coords,
            values,
            linear,
        })
    }

    /// A tensor with no stored entries.
    pub fn empty(shape: Vec<usize>) -> Result<Self> {
        SparseTensor::new(shape, Vec::new())
    }

    /// Builds a tensor from a dense column-major buffer (first mode fastest).
    pub fn from_dense(shape: Vec<usize>, data: &[f64]) -> Result<Self> {
        validate_shape(&shape)?;
        let total: usize = shape.iter().product();
        if data.len() != total {
            return Err(SwiftError::Shape(format!(
                "dense buffer has {} values, shape {:?} needs {}",
                data.len(),
                shape,
                total
            )));
        }
        let entries = data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(lin, &v)| (multi_index(&shape, lin), v))
            .collect();
        SparseTensor::new(shape, entries)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Number of cells, `prod I_n`.
    pub fn numel(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The index tuple of the `k`-th stored entry.
    pub fn coord(&self, k: usize) -> &[usize] {
        let n = self.order();
        &self.coords[k * n..(k + 1) * n]
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[usize], f64)> + '_ {
        self.coords
            .chunks_exact(self.order())
            .zip(self.values.iter().copied())
    }

    /// Column-major linear indices of the stored entries, ascending.
    pub fn linear_indices(&self) -> &[usize] {
        &self.linear
    }

    /// Value at `index`, zero when not stored.
    pub fn get(&self, index: &[usize]) -> f64 {
        if index.len() != self.order() || index.iter().zip(&self.shape).any(|(&i, &d)| i >= d) {
            return 0.0;
        }
        let lin = linear_index(&self.shape, index);
        match self.linear.binary_search(&lin) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Dense column-major copy of the tensor.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.numel()];
        for (&lin, &v) in self.linear.iter().zip(&self.values) {
            out[lin] = v;
        }
        out
    }

    /// True when every stored value is exactly one.
    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|&v| v == 1.0)
    }

    /// The sub-tensor of mode-`mode` slices `range`, re-indexed from zero.
    pub fn slab(&self, mode: usize, range: std::ops::Range<usize>) -> Result<SparseTensor> {
        check_mode(mode, self.order())?;
        if range.end > self.shape[mode] || range.start >= range.end {
            return Err(SwiftError::Shape(format!(
                "slab {:?} invalid for extent {}",
                range, self.shape[mode]
            )));
        }
        let mut shape = self.shape.clone();
        shape[mode] = range.end - range.start;
        let entries = self
            .iter()
            .filter(|(idx, _)| range.contains(&idx[mode]))
            .map(|(idx, v)| {
                let mut idx = idx.to_vec();
                idx[mode] -= range.start;
                (idx, v)
            })
            .collect();
        SparseTensor::new(shape, entries)
    }
}

fn validate_shape(shape: &[usize]) -> Result<()> {
    if shape.len() < 2 {
        return Err(SwiftError::Shape(format!(
            "tensor order must be at least 2, got {}",
            shape.len()
        )));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(SwiftError::Shape(format!(
            "extents must be positive, got {shape:?}"
        )));
    }
    Ok(())
}

pub(crate) fn check_mode(mode: usize, order: usize) -> Result<()> {
    if mode >= order {
        Err(SwiftError::ModeOutOfRange { mode, order })
    } else {
        Ok(())
    }
}

/// Column-major linear index (first mode fastest).
pub fn linear_index(shape: &[usize], index: &[usize]) -> usize {
    let mut lin = 0;
    let mut stride = 1;
    for (&i, &d) in index.iter().zip(shape) {
        lin += i * stride;
        stride *= d;
    }
    lin
}

/// Inverse of [`linear_index`].
pub fn multi_index(shape: &[usize], mut lin: usize) -> Vec<usize> {
    shape
        .iter()
        .map(|&d| {
            let i = lin % d;
            lin /= d;
            i
        })
        .collect()
}
