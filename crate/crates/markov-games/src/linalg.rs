use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves the dense system `A x = b` by LU with partial pivoting.
pub(crate) fn solve_dense(a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let lu = a.lu();
    match lu.solve(&b) {
        Some(x) => Ok(x.iter().copied().collect()),
        None => Err(Error::Numeric("singular linear system".into())),
    }
}

/// Builds `(I - P|_rows,rows)` for the given subset of states, where `P` is a
/// full transition matrix. `rows` maps compact indices to state ids.
pub(crate) fn i_minus_p(transition: &[Vec<f64>], rows: &[usize]) -> DMatrix<f64> {
    let m = rows.len();
    DMatrix::from_fn(m, m, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - transition[rows[i]][rows[j]]
    })
}
