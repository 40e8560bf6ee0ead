use super::{ensure_square, kron, unvec, vec, Matrix};
use crate::error::{Error, Result};

/// Solves `a11·X − X·s + g1 = 0` for `X` by vectorization:
/// `(I ⊗ a11 − sᵀ ⊗ I) vec(X) = −vec(g1)`.
pub fn solve_sylvester(a11: &Matrix, s: &Matrix, g1: &Matrix) -> Result<Matrix> {
    let p = ensure_square(a11)?;
    let q = ensure_square(s)?;
    if g1.shape() != (p, q) {
        return Err(Error::Dimension(format!(
            "sylvester right-hand side must be {p}x{q}, got {}x{}",
            g1.nrows(),
            g1.ncols()
        )));
    }
    if p == 0 || q == 0 {
        return Ok(Matrix::zeros(p, q));
    }
    let op = kron(&Matrix::identity(q, q), a11) - kron(&s.transpose(), &Matrix::identity(p, p));
    let sv = op.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smax == 0.0 || smin <= 1e-12 * smax {
        return Err(Error::ResonantSpectra);
    }
    let rhs = -vec(g1);
    let x = op.lu().solve(&rhs).ok_or(Error::ResonantSpectra)?;
    Ok(unvec(&x, p, q))
}
