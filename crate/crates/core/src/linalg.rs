use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// `diag(1 + s) - trust`, the matrix whose inverse maps injected influence to
/// long-run opinions.
pub(crate) fn influence_matrix(trust: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let mut m = -trust.clone();
    for (i, si) in s.iter().enumerate() {
        m[(i, i)] += 1.0 + si;
    }
    m
}

/// Transpose of [`influence_matrix`], built directly.
pub(crate) fn influence_matrix_transposed(trust: &DMatrix<f64>, s: &[f64]) -> DMatrix<f64> {
    let mut m = -trust.transpose();
    for (i, si) in s.iter().enumerate() {
        m[(i, i)] += 1.0 + si;
    }
    m
}

/// Solve `a * x = b` with partial-pivot LU.
pub(crate) fn lu_solve(a: DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = a
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization has a zero pivot".into()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("solution is not finite".into()))
    }
}

pub(crate) fn lu_solve_vec(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let x = a
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("LU factorization has a zero pivot".into()))?;
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::Singular("solution is not finite".into()))
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
