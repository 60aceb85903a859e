use ndarray::{Array2, ArrayView2, ShapeBuilder};

use super::{check_mode, multi_index, SparseTensor};
use crate::error::{Result, SwiftError};

/// Index map between tensor cells and the mode-n unfolding.
#[derive(Clone, Debug)]
pub struct UnfoldLayout {
    shape: Vec<usize>,
    mode: usize,
    strides: Vec<usize>,
    n_cols: usize,
}

impl UnfoldLayout {
    pub fn new(shape: &[usize], mode: usize) -> Result<Self> {
        check_mode(mode, shape.len())?;
        let mut strides = vec![0; shape.len()];
        let mut stride = 1;
        for (k, &d) in shape.iter().enumerate() {
            if k != mode {
                strides[k] = stride;
                stride *= d;
            }
        }
        Ok(UnfoldLayout {
            shape: shape.to_vec(),
            mode,
            strides,
            n_cols: stride,
        })
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn rows(&self) -> usize {
        self.shape[self.mode]
    }

    /// `I_(-n)`, the product of all extents except the unfolded one.
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn column(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.strides)
            .map(|(&i, &s)| i * s)
            .sum()
    }

    /// Writes the cell index of `(row, col)` into `out`.
    pub fn decode_into(&self, row: usize, mut col: usize, out: &mut [usize]) {
        for (k, &d) in self.shape.iter().enumerate() {
            if k == self.mode {
                out[k] = row;
            } else {
                out[k] = col % d;
                col /= d;
            }
        }
    }

    pub fn decode(&self, row: usize, col: usize) -> Vec<usize> {
        let mut out = vec![0; self.shape.len()];
        self.decode_into(row, col, &mut out);
        out
    }
}

/// The mode-n unfolding of a sparse tensor, restricted to its nonzero columns.
///
/// `block` is `I_n × nnz_n` (column-major) and holds the unfolded columns
/// listed in `columns`, which are sorted and each have a positive sum.
#[derive(Clone, Debug, PartialEq)]
pub struct MatricizedView {
    mode: usize,
    shape: Vec<usize>,
    n_cols: usize,
    columns: Vec<usize>,
    block: Array2<f64>,
}

impl MatricizedView {
    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape[self.mode]
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Sorted indices of the columns holding at least one nonzero.
    pub fn nonzero_columns(&self) -> &[usize] {
        &self.columns
    }

    /// `NNZ_n`, the number of nonzero columns.
    pub fn nnz_cols(&self) -> usize {
        self.columns.len()
    }

    /// The nonzero columns as an `I_n × nnz_n` matrix.
    pub fn block(&self) -> &Array2<f64> {
        &self.block
    }

    /// Full `I_n × I_(-n)` dense unfolding.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows(), self.n_cols));
        for (k, &c) in self.columns.iter().enumerate() {
            out.column_mut(c).assign(&self.block.column(k));
        }
        out
    }

    /// Builds a view from a dense `I_n × I_(-n)` matrix.
    pub fn from_dense(mode: usize, shape: &[usize], matrix: ArrayView2<f64>) -> Result<Self> {
        let layout = UnfoldLayout::new(shape, mode)?;
        if matrix.dim() != (layout.rows(), layout.n_cols()) {
            return Err(SwiftError::Shape(format!(
                "matrix {:?} is not a mode-{} unfolding of {:?}",
                matrix.dim(),
                mode,
                shape
            )));
        }
        let columns: Vec<usize> = (0..layout.n_cols())
            .filter(|&c| matrix.column(c).iter().any(|&v| v != 0.0))
            .collect();
        let mut block = Array2::zeros((layout.rows(), columns.len()).f());
        for (k, &c) in columns.iter().enumerate() {
            block.column_mut(k).assign(&matrix.column(c));
        }
        Ok(MatricizedView {
            mode,
            shape: shape.to_vec(),
            n_cols: layout.n_cols(),
            columns,
            block,
        })
    }
}

/// Mode-`mode` unfolding of `tensor`.
pub fn matricize(tensor: &SparseTensor, mode: usize) -> Result<MatricizedView> {
    let layout = UnfoldLayout::new(tensor.shape(), mode)?;
    let mut placed: Vec<(usize, usize, f64)> = tensor
        .iter()
        .map(|(idx, v)| (layout.column(idx), idx[mode], v))
        .collect();
    placed.sort_unstable_by_key(|&(c, r, _)| (c, r));
    let mut columns: Vec<usize> = placed.iter().map(|&(c, _, _)| c).collect();
    columns.dedup();
    let mut block = Array2::zeros((layout.rows(), columns.len()).f());
    let mut k = 0;
    for (c, r, v) in placed {
        while columns[k] != c {
            k += 1;
        }
        block[[r, k]] = v;
    }
    Ok(MatricizedView {
        mode,
        shape: tensor.shape().to_vec(),
        n_cols: layout.n_cols(),
        columns,
        block,
    })
}

/// Inverse of [`matricize`].
pub fn tensorize(view: &MatricizedView, shape: &[usize]) -> Result<SparseTensor> {
    let layout = UnfoldLayout::new(shape, view.mode)?;
    if view.shape != shape || layout.rows() != view.rows() || layout.n_cols() != view.n_cols {
        return Err(SwiftError::Shape(format!(
            "mode-{} view of {:?} cannot fold into {:?}",
            view.mode, view.shape, shape
        )));
    }
    let mut entries = Vec::with_capacity(view.block.len());
    for (k, &c) in view.columns.iter().enumerate() {
        for (r, &v) in view.block.column(k).iter().enumerate() {
            if v != 0.0 {
                entries.push((layout.decode(r, c), v));
            }
        }
    }
    SparseTensor::new(shape.to_vec(), entries)
}

/// Mode-`mode` unfolding of a dense column-major tensor buffer.
pub fn unfold_dense(data: &[f64], shape: &[usize], mode: usize) -> Result<Array2<f64>> {
    let layout = UnfoldLayout::new(shape, mode)?;
    let total: usize = shape.iter().product();
    if data.len() != total {
        return Err(SwiftError::Shape(format!(
            "buffer of {} values does not match {:?}",
            data.len(),
            shape
        )));
    }
    let mut out = Array2::zeros((layout.rows(), layout.n_cols()));
    for (lin, &v) in data.iter().enumerate() {
        let idx = multi_index(shape, lin);
        out[[idx[mode], layout.column(&idx)]] = v;
    }
    Ok(out)
}

/// Folds a dense mode-`mode` unfolding back into a column-major buffer.
pub fn fold_dense(matrix: ArrayView2<f64>, shape: &[usize], mode: usize) -> Result<Vec<f64>> {
    let layout = UnfoldLayout::new(shape, mode)?;
    if matrix.dim() != (layout.rows(), layout.n_cols()) {
        return Err(SwiftError::Shape(format!(
            "matrix {:?} is not a mode-{} unfolding of {:?}",
            matrix.dim(),
            mode,
            shape
        )));
    }
    let mut out = vec![0.0; shape.iter().product()];
    let mut idx = vec![0; shape.len()];
    for ((r, c), &v) in matrix.indexed_iter() {
        layout.decode_into(r, c, &mut idx);
        out[super::linear_index(shape, &idx)] = v;
    }
    Ok(out)
}

/// Rearranges a mode-`from` unfolding into the mode-`to` unfolding of the
/// same tensor (reshape, swap the two modes, reshape).
///
/// For CP factors this maps `A_i (A_⊙^{(-i)})ᵀ` onto `A_n (A_⊙^{(-n)})ᵀ`.
pub fn pi_rearrange(
    matrix: ArrayView2<f64>,
    from: usize,
    to: usize,
    shape: &[usize],
) -> Result<Array2<f64>> {
    let src = UnfoldLayout::new(shape, from)?;
    let dst = UnfoldLayout::new(shape, to)?;
    if matrix.dim() != (src.rows(), src.n_cols()) {
        return Err(SwiftError::Shape(format!(
            "matrix {:?} is not a mode-{} unfolding of {:?}",
            matrix.dim(),
            from,
            shape
        )));
    }
    if from == to {
        return Ok(matrix.to_owned());
    }
    let mut out = Array2::zeros((dst.rows(), dst.n_cols()));
    let mut idx = vec![0; shape.len()];
    for ((r, c), &v) in matrix.indexed_iter() {
        src.decode_into(r, c, &mut idx);
        out[[idx[to], dst.column(&idx)]] = v;
    }
    Ok(out)
}

/// Adds the rearrangement of a column subset of a mode-`from` unfolding into
/// a dense mode-`to` unfolding. `block` holds the columns listed in `cols`;
/// all other columns are taken as zero.
pub fn pi_accumulate_columns(
    block: ArrayView2<f64>,
    cols: &[usize],
    from: usize,
    to: usize,
    shape: &[usize],
    dest: &mut Array2<f64>,
) -> Result<()> {
    let src = UnfoldLayout::new(shape, from)?;
    let dst = UnfoldLayout::new(shape, to)?;
    if block.nrows() != src.rows() || block.ncols() != cols.len() {
        return Err(SwiftError::Shape(format!(
            "column block {:?} does not match {} listed columns of mode {}",
            block.dim(),
            cols.len(),
            from
        )));
    }
    if dest.dim() != (dst.rows(), dst.n_cols()) {
        return Err(SwiftError::Shape(format!(
            "destination {:?} is not a mode-{} unfolding of {:?}",
            dest.dim(),
            to,
            shape
        )));
    }
    let mut idx = vec![0; shape.len()];
    for (k, &c) in cols.iter().enumerate() {
        for (r, &v) in block.column(k).iter().enumerate() {
            if v != 0.0 {
                src.decode_into(r, c, &mut idx);
                dest[[idx[to], dst.column(&idx)]] += v;
            }
        }
    }
    Ok(())
}
