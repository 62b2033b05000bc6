//! Least-squares readout solve.

use log::debug;
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Squared ratio of smallest to largest Cholesky pivot below which the normal
/// equations are treated as numerically singular.
const CONDITION_FLOOR: f64 = 1e-10;

/// Returns `W` (L × p) minimising `‖T − W X‖² + ridge ‖W‖²` for features
/// `X` (p × n) and targets `T` (L × n).
///
/// The normal equations `(X Xᵀ + ridge I) Wᵀ = X Tᵀ` are solved by Cholesky.
/// When the factorisation fails or is badly conditioned the problem is solved
/// by SVD instead, which yields the minimum-norm solution for rank-deficient
/// `X`.
pub fn solve_output_weights(extended: &DMatrix<f64>, targets: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let p = extended.nrows();
    let n = extended.ncols();
    let l = targets.nrows();
    if n == 0 {
        return Err(Error::contract("least squares needs at least one sample"));
    }
    if targets.ncols() != n {
        return Err(Error::contract(format!(
            "features have {n} samples but targets have {}",
            targets.ncols()
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::contract(format!("ridge must be finite and non-negative, got {ridge}")));
    }
    if !extended.iter().chain(targets.iter()).all(|v| v.is_finite()) {
        return Err(Error::contract("least-squares inputs contain non-finite values"));
    }
    if p == 0 {
        return Ok(DMatrix::zeros(l, 0));
    }

    let mut gram = extended * extended.transpose();
    for i in 0..p {
        gram[(i, i)] += ridge;
    }
    let rhs = extended * targets.transpose();

    if let Some(chol) = gram.clone().cholesky() {
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
        if hi > 0.0 && (lo / hi).powi(2) >= CONDITION_FLOOR {
            return Ok(chol.solve(&rhs).transpose());
        }
    }
    debug!("normal equations ill-conditioned (p={p}, n={n}); using SVD");
    svd_solve(extended, targets, ridge)
}

fn svd_solve(extended: &DMatrix<f64>, targets: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let p = extended.nrows();
    let n = extended.ncols();
    let (design, rhs) = if ridge > 0.0 {
        // Ridge as extra rows: [Xᵀ; √ridge I] Wᵀ ≈ [Tᵀ; 0].
        let mut a = DMatrix::zeros(n + p, p);
        a.rows_mut(0, n).copy_from(&extended.transpose());
        let s = ridge.sqrt();
        for i in 0..p {
            a[(n + i, i)] = s;
        }
        let mut b = DMatrix::zeros(n + p, targets.nrows());
        b.rows_mut(0, n).copy_from(&targets.transpose());
        (a, b)
    } else {
        (extended.transpose(), targets.transpose())
    };
    let rows = design.nrows();
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let eps = max_sv * (rows.max(p) as f64) * f64::EPSILON;
    let w_t = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::contract(format!("SVD solve failed: {e}")))?;
    Ok(w_t.transpose())
}
