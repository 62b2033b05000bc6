//! Largest singular value, spectral radius and feedback-matrix scaling.

use log::debug;
use nalgebra::{DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::{ReservoirModel, Structure};

const POWER_TOL: f64 = 1e-12;
const POWER_MAX_ITERS: usize = 10_000;
const SCHUR_MAX_ITERS: usize = 10_000;

/// How the spectral radius of a non-triangular block is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoEstimator {
    /// Use σ_max as the value. Always an upper bound on ρ.
    #[default]
    SigmaBound,
    /// Eigenvalues from a real Schur decomposition.
    Eigen,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleMode {
    /// Scale so that σ_max(W_r) = alpha.
    #[default]
    Contraction,
    /// Scale so that ρ(W_r) = alpha.
    Eq22Spectral,
}

/// Largest singular value by power iteration on `WᵀW`.
pub fn max_singular_value(w: &DMatrix<f64>) -> f64 {
    let n = w.ncols();
    if n == 0 || w.iter().all(|&v| v == 0.0) {
        return 0.0;
    }
    let gram = w.transpose() * w;

    // Golden-ratio offsets keep the start vector away from the axis-aligned
    // and all-ones directions that structured matrices tend to annihilate.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract());
    v.normalize_mut();
    if (&gram * &v).norm() == 0.0 {
        let (j, _) = gram
            .column_iter()
            .enumerate()
            .map(|(j, c)| (j, c.norm()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        v = DVector::zeros(n);
        v[j] = 1.0;
    }

    let mut lambda = 0.0f64;
    let mut next = DVector::zeros(n);
    for _ in 0..POWER_MAX_ITERS {
        next.gemv(1.0, &gram, &v, 0.0);
        let est = v.dot(&next);
        let norm = next.norm();
        if norm == 0.0 {
            return 0.0;
        }
        v.copy_from(&next);
        v /= norm;
        if (est - lambda).abs() <= POWER_TOL * est.abs() {
            lambda = est;
            break;
        }
        lambda = est;
    }
    lambda.max(0.0).sqrt()
}

fn eigen_radius(w: &DMatrix<f64>) -> Result<f64> {
    if w.nrows() == 0 {
        return Ok(0.0);
    }
    match Schur::try_new(w.clone(), f64::EPSILON, SCHUR_MAX_ITERS) {
        Some(schur) => Ok(schur
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)),
        None => Err(Error::EstimationFailure {
            iterations: SCHUR_MAX_ITERS,
            bound: max_singular_value(w),
        }),
    }
}

fn radius_of(w: &DMatrix<f64>, estimator: RhoEstimator) -> Result<f64> {
    match estimator {
        RhoEstimator::SigmaBound => Ok(max_singular_value(w)),
        RhoEstimator::Eigen => eigen_radius(w),
    }
}

/// Spectral radius of a feedback matrix.
///
/// For the block lower-triangular growth shape the spectrum is the spectrum of
/// the leading `initial_block_size` block together with the diagonal entries of
/// the appended rows, so only the small leading block goes through the
/// estimator.
pub fn spectral_radius(
    w: &DMatrix<f64>,
    structure: Structure,
    initial_block_size: usize,
    estimator: RhoEstimator,
) -> Result<f64> {
    if w.nrows() != w.ncols() {
        return Err(Error::contract("spectral radius needs a square matrix"));
    }
    let n = w.nrows();
    match structure {
        Structure::General => radius_of(w, estimator),
        Structure::BlockLowerTriangular => {
            let n0 = initial_block_size.min(n);
            let block = w.view((0, 0), (n0, n0)).into_owned();
            let rho_block = radius_of(&block, estimator)?;
            let diag = (n0..n).map(|i| w[(i, i)].abs()).fold(0.0, f64::max);
            Ok(rho_block.max(diag))
        }
    }
}

/// Result of [`scale_feedback`].
#[derive(Debug, Clone)]
pub struct Scaled {
    pub model: ReservoirModel,
    /// Multiplier applied to the feedback matrix (1 when nothing was done).
    pub factor: f64,
    /// For [`ScaleMode::Eq22Spectral`]: whether `alpha < ρ/σ_max`, i.e. the
    /// scaled matrix is a contraction. `None` in contraction mode.
    pub certified: Option<bool>,
}

/// Rescales the feedback matrix so that its σ_max (contraction) or ρ
/// (eq22_spectral) equals `alpha`.
pub fn scale_feedback(
    model: &ReservoirModel,
    alpha: f64,
    mode: ScaleMode,
    estimator: RhoEstimator,
) -> Result<Scaled> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::contract(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let w = model.feedback();
    let sigma = max_singular_value(w);
    let (reference, certified) = match mode {
        ScaleMode::Contraction => (sigma, None),
        ScaleMode::Eq22Spectral => {
            let rho = spectral_radius(w, model.structure(), model.initial_block_size(), estimator)?;
            let certified = if sigma > 0.0 { alpha < rho / sigma } else { true };
            (rho, Some(certified))
        }
    };
    if reference == 0.0 {
        debug!("feedback matrix has zero {mode:?} norm; scaling skipped");
        return Ok(Scaled {
            model: model.clone(),
            factor: 1.0,
            certified: certified.map(|_| true),
        });
    }
    let factor = alpha / reference;
    Ok(Scaled {
        model: model.with_feedback(w * factor),
        factor,
        certified,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::Activation;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn model_with(fb: DMatrix<f64>, structure: Structure, n0: usize) -> ReservoirModel {
        let n = fb.nrows();
        ReservoirModel::new(
            DMatrix::zeros(n, 1),
            fb,
            DVector::zeros(n),
            DMatrix::zeros(1, n + 1),
            Activation::Tanh,
            structure,
            n0,
        )
        .unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_relative_eq!(max_singular_value(&DMatrix::identity(3, 3)), 1.0, max_relative = 1e-12);
        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.5, -0.8]));
        assert_relative_eq!(max_singular_value(&d), 0.8, max_relative = 1e-12);
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        // eigenvalues of JᵀJ = [[1,1],[1,2]] are (3 ± √5)/2, sqrt of the larger
        let oracle = ((3.0 + 5f64.sqrt()) / 2.0).sqrt();
        assert_relative_eq!(oracle, 1.618_033_988_7, epsilon = 1e-10);
        assert_relative_eq!(max_singular_value(&j), oracle, max_relative = 1e-9);
        assert_eq!(max_singular_value(&DMatrix::zeros(4, 4)), 0.0);
    }

    #[test]
    fn sigma_on_start_vector_null_space() {
        // Rows sum to zero, so a constant start vector would be annihilated.
        let w = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 1.0, -1.0]);
        assert_relative_eq!(max_singular_value(&w), 2.0, max_relative = 1e-9);
    }

    #[test]
    fn radius_examples() {
        let mut tri = DMatrix::zeros(3, 3);
        tri[(1, 1)] = 0.5;
        tri[(2, 2)] = -0.8;
        tri[(2, 1)] = 0.3;
        for est in [RhoEstimator::SigmaBound, RhoEstimator::Eigen] {
            let rho = spectral_radius(&tri, Structure::BlockLowerTriangular, 1, est).unwrap();
            assert_relative_eq!(rho, 0.8, epsilon = 1e-15);
        }
        assert_eq!(
            spectral_radius(&DMatrix::zeros(3, 3), Structure::General, 0, RhoEstimator::Eigen).unwrap(),
            0.0
        );
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -0.9, 0.9, 0.0]);
        let rho = spectral_radius(&rot, Structure::General, 2, RhoEstimator::Eigen).unwrap();
        assert_relative_eq!(rho, 0.9, epsilon = 1e-12);
    }

    #[test]
    fn eigen_estimator_below_sigma_for_nonnormal() {
        let w = DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 0.0, 0.4]);
        let rho = spectral_radius(&w, Structure::General, 2, RhoEstimator::Eigen).unwrap();
        assert_relative_eq!(rho, 0.5, epsilon = 1e-12);
        assert!(rho < max_singular_value(&w));
    }

    #[test]
    fn contraction_sets_sigma() {
        let fb = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0]));
        let out = scale_feedback(&model_with(fb, Structure::General, 2), 0.5, ScaleMode::Contraction, RhoEstimator::SigmaBound)
            .unwrap();
        assert_relative_eq!(max_singular_value(out.model.feedback()), 0.5, max_relative = 1e-12);
        assert!(out.certified.is_none());
    }

    #[test]
    fn eq22_sets_rho_and_reports_certification() {
        let fb = DMatrix::from_row_slice(2, 2, &[0.0, -0.8, 0.8, 0.0]);
        let out = scale_feedback(&model_with(fb, Structure::General, 2), 0.4, ScaleMode::Eq22Spectral, RhoEstimator::Eigen)
            .unwrap();
        let rho = spectral_radius(out.model.feedback(), Structure::General, 2, RhoEstimator::Eigen).unwrap();
        assert_relative_eq!(rho, 0.4, epsilon = 1e-12);

        let d = DMatrix::from_diagonal(&DVector::from_row_slice(&[0.5, -0.8]));
        let out = scale_feedback(&model_with(d, Structure::General, 2), 0.79, ScaleMode::Eq22Spectral, RhoEstimator::Eigen)
            .unwrap();
        assert_eq!(out.certified, Some(true));

        // Non-normal: ρ = 0.5, σ ≈ 2.09, so ρ/σ < 0.79 and the scaled matrix
        // is not a certified contraction.
        let nn = DMatrix::from_row_slice(2, 2, &[0.5, 2.0, 0.0, 0.4]);
        let out = scale_feedback(&model_with(nn, Structure::General, 2), 0.79, ScaleMode::Eq22Spectral, RhoEstimator::Eigen)
            .unwrap();
        assert_eq!(out.certified, Some(false));
    }

    #[test]
    fn zero_matrix_is_noop_and_alpha_checked() {
        let m = model_with(DMatrix::zeros(2, 2), Structure::General, 2);
        let out = scale_feedback(&m, 0.5, ScaleMode::Contraction, RhoEstimator::SigmaBound).unwrap();
        assert_eq!(out.model, m);
        assert_eq!(out.factor, 1.0);
        assert!(scale_feedback(&m, 1.0, ScaleMode::Contraction, RhoEstimator::SigmaBound).is_err());
        assert!(scale_feedback(&m, 0.0, ScaleMode::Contraction, RhoEstimator::SigmaBound).is_err());
    }

    fn square(max_n: usize) -> impl Strategy<Value = DMatrix<f64>> {
        (1..=max_n).prop_flat_map(|n| {
            proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
        })
    }

    proptest! {
        #[test]
        fn sigma_matches_svd(w in square(6)) {
            let svd = w.clone().singular_values().max();
            let sigma = max_singular_value(&w);
            prop_assert!((sigma - svd).abs() <= 1e-7 * svd.max(1e-300));
        }

        #[test]
        fn sigma_is_homogeneous(w in square(6), c in -3.0f64..3.0) {
            let s = max_singular_value(&w);
            let sc = max_singular_value(&(&w * c));
            prop_assert!((sc - c.abs() * s).abs() <= 1e-7 * (c.abs() * s).max(1e-12));
        }

        #[test]
        fn rho_bounded_by_sigma(w in square(6)) {
            let sigma = max_singular_value(&w);
            for est in [RhoEstimator::SigmaBound, RhoEstimator::Eigen] {
                let rho = spectral_radius(&w, Structure::General, w.nrows(), est).unwrap();
                prop_assert!(rho <= sigma + 1e-9 * sigma.max(1.0));
            }
        }
    }
}
