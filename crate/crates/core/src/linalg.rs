//! Dense linear-algebra helpers shared by the simulation modules.

use nalgebra::{Complex, DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{FlycomError, Result};

pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

/// Real matrix with i.i.d. N(0,1) entries, filled in column-major order.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample(StandardNormal))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Complex matrix with i.i.d. CN(0, `variance`) entries (real and imaginary
/// parts independent, each with variance `variance / 2`).
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> CMatrix {
    let scale = (variance / 2.0).sqrt();
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(scale * re, scale * im)
        })
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Orthonormal basis of the column space of a tall matrix via QR, with the
/// sign of each column chosen so that the triangular factor has a
/// nonnegative diagonal.
pub fn orthonormal_columns(m: DMatrix<f64>) -> DMatrix<f64> {
    assert!(
        m.nrows() >= m.ncols(),
        "orthonormal_columns expects a tall matrix"
    );
    let qr = m.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn ensure_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(FlycomError::NonFinite)
    }
}

/// Largest absolute entry of `m - m^T`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Full eigendecomposition of a real symmetric matrix, eigenvalues in
/// descending order. Each eigenvector is signed so that its largest-magnitude
/// entry (first one on ties) is positive.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if !m.is_square() {
        return Err(FlycomError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m)?;
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > 1e-8 * scale {
        return Err(FlycomError::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues descending. Each
/// eigenvector is rotated so its largest-magnitude entry is real positive.
pub fn herm_eigen_desc(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(FlycomError::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        return Err(FlycomError::NonFinite);
    }
    let eig = SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col = eig.eigenvectors.column(src).into_owned();
        let pivot = col.icamax();
        let p = col[pivot];
        let norm = p.norm();
        if norm > 0.0 {
            let phase = p.conj() / norm;
            col *= phase;
        }
        vectors.set_column(dst, &col);
    }
    Ok((values, vectors))
}

/// `U U^T` for a real column-orthonormal `U`.
pub fn projector(u: &DMatrix<f64>) -> DMatrix<f64> {
    u * u.transpose()
}

/// Largest absolute entry of `U^T U - I`.
pub fn orthonormality_defect(u: &DMatrix<f64>) -> f64 {
    let gram = u.transpose() * u;
    let n = gram.nrows();
    (gram - DMatrix::<f64>::identity(n, n)).amax()
}

/// Frobenius distance between the projectors of two column-orthonormal bases.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (projector(a) - projector(b)).norm()
}

/// Promote a real matrix to complex.
pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Ratio of extreme eigenvalues of a Hermitian positive definite matrix;
/// infinite when the smallest eigenvalue is not positive.
pub fn hermitian_condition(m: &CMatrix) -> Result<f64> {
    let (values, _) = herm_eigen_desc(m)?;
    let hi = values[0];
    let lo = *values.last().expect("nonempty");
    if lo <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}
