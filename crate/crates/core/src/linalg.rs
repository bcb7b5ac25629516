//! Cholesky factors of covariance matrices supplied by users.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues down to this multiple of the largest diagonal entry are
/// treated as rounding noise and clamped to zero.
const PSD_TOLERANCE: f64 = 1e-10;

/// Builds a square matrix from row-major rows, checking shape.
pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::domain(format!("{what} must be a square matrix")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Checks symmetry and positive semi-definiteness; eigenvalues below
/// `-PSD_TOLERANCE * scale` are rejected.
pub fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::domain(format!("{what} must be square")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(format!("{what} has non-finite entries")));
    }
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::domain(format!("{what} is not symmetric at ({i},{j})")));
            }
        }
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if min_eig < -PSD_TOLERANCE * scale {
        return Err(Error::domain(format!(
            "{what} is not positive semi-definite (smallest eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Lower-triangular `L` with `L Lᵀ = m` for a PSD matrix.
///
/// Pivots that fall below the clamp tolerance (singular directions) produce
/// zero columns, so semi-definite inputs are accepted.
pub fn cholesky_psd(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    check_psd(m, what)?;
    let n = m.nrows();
    let scale = (0..n).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= PSD_TOLERANCE * scale {
            continue;
        }
        let d = diag.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}
