use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Pseudo-inverse of a symmetric matrix through its eigendecomposition.
/// Eigenvalues with magnitude at or below `rtol` times the largest one are
/// treated as zero.
pub(crate) fn pinv_symmetric(m: &Matrix, rtol: f64) -> Result<Matrix> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::shape(format!("pseudo-inverse of a non-square {}x{} matrix", n, m.cols())));
    }
    if !m.is_finite() {
        return Err(Error::Numeric("non-finite entries in the normal-equations matrix".into()));
    }
    let eig = SymmetricEigen::new(DMatrix::from_column_slice(n, n, m.as_slice()));
    let largest = eig.eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let cutoff = rtol * largest;
    let mut out = Matrix::zeros(n, n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.abs() <= cutoff || lambda == 0.0 {
            continue;
        }
        let v = eig.eigenvectors.column(k);
        let inv = 1.0 / lambda;
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += inv * v[i] * v[j];
            }
        }
    }
    Ok(out)
}
