//! Small shared dense linear-algebra helpers.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

pub const JITTER_START: f64 = 1e-8;
pub const JITTER_MAX: f64 = 1e-4;

/// Cholesky of a symmetric matrix, retrying with `eps * I` jitter escalating
/// tenfold from 1e-8 to 1e-4 before giving up.
pub fn spd_cholesky_with_jitter(mat: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = Cholesky::new(mat.clone()) {
        return Ok((chol, 0.0));
    }
    let mut eps = JITTER_START;
    while eps <= JITTER_MAX {
        log::warn!("singular matrix; retrying Cholesky with jitter {eps:.1e}");
        let mut jittered = mat.clone();
        for i in 0..jittered.nrows() {
            jittered[(i, i)] += eps;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok((chol, eps));
        }
        eps *= 10.0;
    }
    Err(Error::SingularHessian { max_jitter: JITTER_MAX })
}

/// Inverse of a symmetric positive definite matrix via Cholesky (with the
/// same jitter fallback).
pub fn spd_inverse(mat: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (chol, _) = spd_cholesky_with_jitter(mat)?;
    Ok(chol.inverse())
}

/// Condition number of a symmetric matrix from its eigenvalue extremes.
pub fn symmetric_condition_number(mat: &DMatrix<f64>) -> f64 {
    let eigen = mat.clone().symmetric_eigen();
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for &ev in eigen.eigenvalues.iter() {
        let a = ev.abs();
        min = min.min(a);
        max = max.max(a);
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Force exact symmetry: `(A + A^T) / 2`.
pub fn symmetrize(mat: &DMatrix<f64>) -> DMatrix<f64> {
    (mat + mat.transpose()) * 0.5
}
