//! Small shared solve helpers.
//!
//! Every linear system in this crate is a Gram or ridge system, so the first
//! attempt is always a Cholesky factorization; the fallback is a
//! column-pivoted QR least-squares solve.

use nalgebra::{Cholesky, DMatrix, DVector};

/// Solve the symmetric positive-definite system `a x = b`, or `None` if the
/// Cholesky factorization fails.
pub(crate) fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    Cholesky::new(a).map(|c| c.solve(b))
}

/// Solve `a x = b` with a Cholesky attempt and a column-pivoted QR fallback.
/// The flag reports whether the fallback was taken. A singular system falls
/// through to the minimum-norm SVD solution.
pub(crate) fn solve_spd_or_lstsq(a: DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, bool) {
    if let Some(c) = Cholesky::new(a.clone()) {
        return (c.solve(b), false);
    }
    if let Some(x) = a.clone().col_piv_qr().solve(b) {
        return (x, true);
    }
    let svd = a.svd(true, true);
    (
        svd.solve(b, 1e-12).unwrap_or_else(|_| DVector::zeros(b.len())),
        true,
    )
}
