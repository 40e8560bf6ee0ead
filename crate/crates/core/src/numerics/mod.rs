//! Small dense numerics used throughout the crate.

mod expm;
mod fd;
mod grid;
mod ode;
mod quadrature;
mod sylvester;

pub use expm::expm;
pub use fd::{fornberg_weights, one_sided_derivative};
pub use grid::{Side, TimeGrid};
pub use ode::{integrate_ode, NodeSide, TrajSegment, Trajectory};
pub use quadrature::{integrate_piecewise, repeated_integral, simpson};
pub use sylvester::solve_sylvester;

use crate::error::{Error, Result};

/// Dense real matrix, the carrier for every matrix quantity in the crate.
pub type Matrix = nalgebra::DMatrix<f64>;

/// Induced Euclidean (spectral) norm.
pub fn norm2(m: &Matrix) -> f64 {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return 0.0;
    }
    if r == 1 || c == 1 {
        return m.norm();
    }
    if r == 2 && c == 2 {
        let (a, b, cc, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let s = a * a + b * b + cc * cc + d * d;
        let det = a * d - b * cc;
        let disc = (s * s - 4.0 * det * det).max(0.0).sqrt();
        return ((s + disc) / 2.0).sqrt();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Ratio of extreme singular values; `inf` for singular or empty input.
pub fn condition_number(m: &Matrix) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn ensure_square(m: &Matrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Applies `(x^T ⊗ y)` to every column of `omega` without forming the
/// Kronecker product. Columns are read as `vec` (column-major) of a
/// `y.ncols() × x.nrows()` matrix.
pub fn kron_t_apply(x: &Matrix, y: &Matrix, omega: &Matrix) -> Matrix {
    let p = y.ncols();
    let q = x.nrows();
    debug_assert_eq!(omega.nrows(), p * q);
    let mut out = Matrix::zeros(y.nrows() * x.ncols(), omega.ncols());
    for j in 0..omega.ncols() {
        let w = Matrix::from_column_slice(p, q, omega.column(j).as_slice());
        let img = y * w * x;
        out.column_mut(j).copy_from_slice(img.as_slice());
    }
    out
}

/// Column-major vectorization.
pub fn vec(m: &Matrix) -> Matrix {
    Matrix::from_column_slice(m.len(), 1, m.as_slice())
}

/// Inverse of [`vec`].
pub fn unvec(v: &Matrix, rows: usize, cols: usize) -> Matrix {
    Matrix::from_column_slice(rows, cols, v.as_slice())
}

/// Row-major nested rows, the layout used in reports and scenario files.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Inverse of [`to_rows`]; every row must have `cols` entries.
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Option<Matrix> {
    if rows.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(Matrix::from_row_iterator(
        rows.len(),
        cols,
        rows.iter().flatten().copied(),
    ))
}

/// Inverse via LU; `None` when the matrix is numerically singular.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    if m.nrows() == 0 {
        return Some(m.clone());
    }
    m.clone().try_inverse()
}
