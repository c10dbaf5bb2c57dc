//! Small dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, SVD};
use num_complex::Complex64;

use crate::{CMatrix, CVector, Error, Result};

/// Cholesky factor of `a`, rejecting factors with a non-positive-real
/// diagonal (complex square roots never fail on their own).
fn cholesky(a: &CMatrix) -> Result<Cholesky<Complex64, nalgebra::Dyn>> {
    let chol = Cholesky::new(a.clone()).ok_or_else(|| Error::Singular("Cholesky factorization failed".into()))?;
    let l = chol.l_dirty();
    let tol = 1e-12 * l.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if l.diagonal().iter().any(|z| !(z.re > 0.0) || z.im.abs() > tol) {
        return Err(Error::Singular("matrix is not positive definite".into()));
    }
    Ok(chol)
}

/// `A^{-1} B` for Hermitian positive definite `A`.
pub fn solve_hpd(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let chol = cholesky(a)?;
    Ok(chol.solve(b))
}

/// Inverse of a Hermitian positive definite matrix.
pub fn inverse_hpd(a: &CMatrix) -> Result<CMatrix> {
    let chol = cholesky(a)?;
    Ok(chol.inverse())
}

/// Inverse of a general square matrix via LU.
pub fn inverse(a: &CMatrix) -> Result<CMatrix> {
    if !a.is_square() {
        return Err(Error::dims(format!("{}x{} is not square", a.nrows(), a.ncols())));
    }
    a.clone().lu().try_inverse().ok_or_else(|| Error::Singular("LU inverse failed".into()))
}

/// `X A^{-1}` for Hermitian positive definite `A`, computed as `(A^{-1} X^H)^H`.
pub fn right_solve_hpd(x: &CMatrix, a: &CMatrix) -> Result<CMatrix> {
    Ok(solve_hpd(a, &x.adjoint())?.adjoint())
}

/// Moore-Penrose pseudo-inverse with tolerance `max(m, n) * eps * sigma_max`.
pub fn pinv(a: &CMatrix) -> Result<CMatrix> {
    let (m, n) = a.shape();
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = (m.max(n) as f64) * f64::EPSILON * smax;
    svd.pseudo_inverse(tol).map_err(|e| Error::Singular(e.to_string()))
}

/// Kronecker product.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(a: &CMatrix) -> CVector {
    CVector::from_column_slice(a.as_slice())
}

/// Inverse of [`vec`] for an `rows x cols` matrix.
pub fn unvec(v: &CVector, rows: usize, cols: usize) -> Result<CMatrix> {
    if v.len() != rows * cols {
        return Err(Error::dims(format!("length {} != {rows}x{cols}", v.len())));
    }
    Ok(CMatrix::from_column_slice(rows, cols, v.as_slice()))
}

/// Diagonal part of a square matrix, as a matrix.
pub fn diag_part(a: &CMatrix) -> CMatrix {
    CMatrix::from_diagonal(&a.diagonal())
}

/// `A - diag(A)`.
pub fn nondiag_part(a: &CMatrix) -> CMatrix {
    a - diag_part(a)
}

/// Real diagonal entries of a Hermitian matrix.
pub fn real_diagonal(a: &CMatrix) -> Vec<f64> {
    a.diagonal().iter().map(|z| z.re).collect()
}

/// Diagonal matrix from real entries.
pub fn real_diag_matrix(d: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&CVector::from_iterator(d.len(), d.iter().map(|&x| Complex64::new(x, 0.0))))
}

/// Scale row `k` by `s[k]`.
pub fn scale_rows(a: &CMatrix, s: &[f64]) -> CMatrix {
    let mut out = a.clone();
    for (k, mut row) in out.row_iter_mut().enumerate() {
        row *= Complex64::new(s[k], 0.0);
    }
    out
}

/// Scale column `k` by `s[k]`.
pub fn scale_cols(a: &CMatrix, s: &[f64]) -> CMatrix {
    let mut out = a.clone();
    for (k, mut col) in out.column_iter_mut().enumerate() {
        col *= Complex64::new(s[k], 0.0);
    }
    out
}

/// Element-wise complex arcsine applied separately to the real and imaginary
/// parts, each clipped to `[-1, 1]`.
pub fn asin_c(a: &CMatrix) -> CMatrix {
    a.map(|z| Complex64::new(z.re.clamp(-1.0, 1.0).asin(), z.im.clamp(-1.0, 1.0).asin()))
}

/// True if `a` is Hermitian up to `tol` in max-abs norm.
pub fn is_hermitian(a: &CMatrix, tol: f64) -> bool {
    a.is_square() && (a - a.adjoint()).iter().all(|z| z.norm() <= tol)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    let h = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    h.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Maximum absolute entry of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Complex identity.
pub fn eye(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Real matrix promoted to complex.
pub fn from_real(a: &DMatrix<f64>) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}
