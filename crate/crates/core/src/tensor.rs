//! Dense tensors, mode-n unfolding, planted-spectrum synthetic data and the
//! principal-eigenspace operator.
//!
//! Tensors are stored with the first mode varying fastest. Mode-n unfolding
//! places mode `n` on the rows; the column index of entry `(i_1, …, i_N)` is
//! `Σ_{k≠n} i_k · Π_{m<k, m≠n} I_m`. Modes are 0-based throughout.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;

use crate::error::{FlycomError, Result};
use crate::linalg::{gaussian_matrix, orthonormal_columns, sym_eigen_desc};
use crate::rng::{substream, Stream};

/// N-mode real tensor, first mode fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(FlycomError::InvalidArgument(format!(
                "a tensor needs at least 2 modes, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(FlycomError::InvalidArgument(
                "tensor dimensions must be positive".into(),
            ));
        }
        let expected: usize = dims.iter().product();
        if expected != data.len() {
            return Err(FlycomError::DimensionMismatch(format!(
                "dims {:?} need {} entries, got {}",
                dims,
                expected,
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }
}

/// Column strides of the unfolding along `mode`.
fn unfolding_strides(dims: &[usize], mode: usize) -> Vec<usize> {
    let mut strides = vec![0; dims.len()];
    let mut acc = 1;
    for (k, &d) in dims.iter().enumerate() {
        if k != mode {
            strides[k] = acc;
            acc *= d;
        }
    }
    strides
}

/// Visit every entry as `(linear index, row, column)` of the mode unfolding.
fn for_each_unfolded(dims: &[usize], mode: usize, mut f: impl FnMut(usize, usize, usize)) {
    let strides = unfolding_strides(dims, mode);
    let total: usize = dims.iter().product();
    let mut idx = vec![0usize; dims.len()];
    let mut col = 0usize;
    for lin in 0..total {
        f(lin, idx[mode], col);
        // advance the multi-index, first mode fastest
        for k in 0..dims.len() {
            idx[k] += 1;
            if k != mode {
                col += strides[k];
            }
            if idx[k] < dims[k] {
                break;
            }
            if k != mode {
                col -= strides[k] * dims[k];
            }
            idx[k] = 0;
        }
    }
}

/// Mode-`mode` unfolding of a tensor (0-based mode).
pub fn unfold(tensor: &DenseTensor, mode: usize) -> Result<DMatrix<f64>> {
    let order = tensor.order();
    if mode >= order {
        return Err(FlycomError::ModeOutOfRange { mode, order });
    }
    let rows = tensor.dims[mode];
    let cols = tensor.data.len() / rows;
    let mut out = DMatrix::zeros(rows, cols);
    for_each_unfolded(&tensor.dims, mode, |lin, i, j| {
        out[(i, j)] = tensor.data[lin]
    });
    Ok(out)
}

/// Inverse of [`unfold`].
pub fn refold(matrix: &DMatrix<f64>, dims: &[usize], mode: usize) -> Result<DenseTensor> {
    if mode >= dims.len() {
        return Err(FlycomError::ModeOutOfRange {
            mode,
            order: dims.len(),
        });
    }
    let total: usize = dims.iter().product();
    if matrix.nrows() != dims[mode] || matrix.nrows() * matrix.ncols() != total {
        return Err(FlycomError::DimensionMismatch(format!(
            "{}x{} matrix cannot be refolded into {:?} along mode {}",
            matrix.nrows(),
            matrix.ncols(),
            dims,
            mode
        )));
    }
    let mut data = vec![0.0; total];
    for_each_unfolded(dims, mode, |lin, i, j| data[lin] = matrix[(i, j)]);
    DenseTensor::new(dims.to_vec(), data)
}

/// Top-`r` eigenvectors of a symmetric PSD matrix, as orthonormal columns
/// ordered by descending eigenvalue.
pub fn principal_eigenspace(m: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    if r > m.nrows() {
        return Err(FlycomError::RankExceedsDimension {
            rank: r,
            dim: m.nrows(),
        });
    }
    let (_, vectors) = sym_eigen_desc(m)?;
    Ok(vectors.columns(0, r).into_owned())
}

/// Planted SVD `X = U_X Σ_X V_X^T` of a synthetic unfolding.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `I×I` orthogonal.
    pub left_basis: DMatrix<f64>,
    /// Descending, first `principal_dim` entries equal to one.
    pub singular_values: Vec<f64>,
    /// `J×I` column-orthonormal.
    pub right_basis: DMatrix<f64>,
    pub principal_dim: usize,
}

impl GroundTruth {
    /// First `r` columns of `U_X`.
    pub fn principal_basis(&self) -> DMatrix<f64> {
        self.left_basis.columns(0, self.principal_dim).into_owned()
    }

    /// `Σ_{i>r} σ_i²`, the error floor of any rank-r estimate.
    pub fn residual_energy(&self) -> f64 {
        self.singular_values[self.principal_dim..]
            .iter()
            .map(|s| s * s)
            .sum()
    }

    /// `‖X‖_F² = Σ σ_i²`.
    pub fn total_energy(&self) -> f64 {
        self.singular_values.iter().map(|s| s * s).sum()
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        let mut scaled = self.left_basis.clone();
        for (j, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*s);
        }
        scaled * self.right_basis.transpose()
    }
}

/// Polynomially decaying spectrum: `r` ones followed by
/// `1/2^ξ, 1/3^ξ, …, 1/(I−r)^ξ`. The residual run has `I−r` slots but the
/// sequence `2..=I−r` only `I−r−1` terms, so the last denominator repeats.
pub fn planted_spectrum(rows: usize, r: usize, xi: f64) -> Vec<f64> {
    let tail = rows - r;
    let last = tail.max(2);
    let mut values = vec![1.0; r];
    values.extend((1..=tail).map(|m| 1.0 / ((m + 1).min(last) as f64).powf(xi)));
    values
}

/// Synthetic `I×J` unfolding with planted spectrum and Gaussian-derived
/// singular bases, deterministic in `seed`.
pub fn synth_unfolding(
    rows: usize,
    cols: usize,
    r: usize,
    xi: f64,
    seed: u64,
) -> Result<(DMatrix<f64>, GroundTruth)> {
    if r == 0 || r >= rows {
        return Err(FlycomError::InvalidArgument(format!(
            "principal dimension must satisfy 1 <= r < I (r={r}, I={rows})"
        )));
    }
    if rows > cols {
        return Err(FlycomError::InvalidArgument(format!(
            "expected I <= J (I={rows}, J={cols})"
        )));
    }
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(FlycomError::InvalidArgument(format!(
            "decay exponent must be positive, got {xi}"
        )));
    }
    let mut left_rng = substream(seed, Stream::Data, 0, 0);
    let mut right_rng = substream(seed, Stream::Data, 1, 0);
    let left_basis = orthonormal_columns(gaussian_matrix(&mut left_rng, rows, rows));
    let right_basis = orthonormal_columns(gaussian_matrix(&mut right_rng, cols, rows));
    let truth = GroundTruth {
        left_basis,
        singular_values: planted_spectrum(rows, r, xi),
        right_basis,
        principal_dim: r,
    };
    Ok((truth.assemble(), truth))
}

/// Column-disjoint split of an unfolding across devices.
#[derive(Debug, Clone)]
pub struct ColumnPartition {
    /// `X_k`, in device order.
    pub locals: Vec<DMatrix<f64>>,
    /// `permutation[c]` is the original column placed at position `c` of
    /// `[X_1, …, X_K]`.
    pub permutation: Vec<usize>,
}

impl ColumnPartition {
    /// `Tr(X_k^T X_k)` per device.
    pub fn local_traces(&self) -> Vec<f64> {
        self.locals.iter().map(|x| x.norm_squared()).collect()
    }

    pub fn column_counts(&self) -> Vec<usize> {
        self.locals.iter().map(|x| x.ncols()).collect()
    }

    /// `[X_1, …, X_K]`.
    pub fn concatenated(&self) -> DMatrix<f64> {
        let rows = self.locals[0].nrows();
        let mut out = DMatrix::zeros(rows, self.permutation.len());
        let mut offset = 0;
        for x in &self.locals {
            out.columns_mut(offset, x.ncols()).copy_from(x);
            offset += x.ncols();
        }
        out
    }
}

/// Shuffle the columns of `x` and deal them to `devices` devices in
/// near-equal contiguous runs. A single device keeps the original order.
pub fn partition_columns(x: &DMatrix<f64>, devices: usize, seed: u64) -> Result<ColumnPartition> {
    let cols = x.ncols();
    if devices == 0 || devices > cols {
        return Err(FlycomError::InvalidArgument(format!(
            "device count must be in 1..={cols}, got {devices}"
        )));
    }
    let mut permutation: Vec<usize> = (0..cols).collect();
    if devices > 1 {
        let mut rng = substream(seed, Stream::Partition, 0, 0);
        permutation.shuffle(&mut rng);
    }
    let base = cols / devices;
    let extra = cols % devices;
    let mut locals = Vec::with_capacity(devices);
    let mut offset = 0;
    for k in 0..devices {
        let width = base + usize::from(k < extra);
        let mut local = DMatrix::zeros(x.nrows(), width);
        for c in 0..width {
            local.set_column(c, &x.column(permutation[offset + c]));
        }
        locals.push(local);
        offset += width;
    }
    Ok(ColumnPartition {
        locals,
        permutation,
    })
}
