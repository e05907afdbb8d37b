use nalgebra::{DMatrix, DVector};

use super::{check_finite, ModelKind, RidgeParams, TrainedReadout, TrainingError};

/// Column means and centred copies of `x` and `y`.
pub(super) fn center(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
    let n = x.nrows() as f64;
    let x_mean = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.sum() / n));
    let y_mean = y.sum() / n;
    let mut xc = x.clone();
    for (mut col, m) in xc.column_iter_mut().zip(x_mean.iter()) {
        col.add_scalar_mut(-m);
    }
    let yc = y.add_scalar(-y_mean);
    (xc, yc, x_mean, y_mean)
}

/// Ridge regression through the regularised normal equations.
///
/// With `fit_intercept` the columns of `x` and `y` are centred first, so the
/// penalty never touches the intercept. The system
/// `(Xc^T Xc + alpha I) w = Xc^T yc` is solved by Cholesky factorisation.
/// When the factorisation fails (alpha = 0 on rank-deficient data) the
/// minimum-norm least-squares solution is returned instead.
pub fn fit_ridge(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &RidgeParams,
) -> Result<TrainedReadout, TrainingError> {
    if x.nrows() == 0 {
        return Err(TrainingError::TooFewRows { rows: 0 });
    }
    if x.nrows() != y.len() {
        return Err(TrainingError::LengthMismatch {
            rows: x.nrows(),
            targets: y.len(),
        });
    }
    if !(p.alpha >= 0.0) || !p.alpha.is_finite() {
        return Err(TrainingError::InvalidParams(format!(
            "alpha must be a non-negative number, got {}",
            p.alpha
        )));
    }
    check_finite(x, y)?;

    let (xc, yc, x_mean, y_mean) = if p.fit_intercept {
        center(x, y)
    } else {
        (x.clone(), y.clone(), DVector::zeros(x.ncols()), 0.0)
    };

    let mut gram = xc.tr_mul(&xc);
    for i in 0..gram.nrows() {
        gram[(i, i)] += p.alpha;
    }
    let rhs = xc.tr_mul(&yc);

    let weights = match gram.clone().cholesky() {
        Some(chol) if chol.l().diagonal().iter().all(|d| *d > 0.0) => {
            let w = chol.solve(&rhs);
            if w.iter().all(|v| v.is_finite()) {
                w
            } else {
                min_norm_solution(&xc, &yc, p.alpha)?
            }
        }
        _ => min_norm_solution(&xc, &yc, p.alpha)?,
    };
    let intercept = if p.fit_intercept {
        y_mean - x_mean.dot(&weights)
    } else {
        0.0
    };
    let kind = if p.alpha == 0.0 {
        ModelKind::Linear
    } else {
        ModelKind::Ridge
    };
    Ok(TrainedReadout {
        weights,
        intercept,
        kind,
    })
}

/// SVD solution `w = V diag(s / (s^2 + alpha)) U^T y`, dropping singular
/// values below the rank tolerance.
fn min_norm_solution(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>, TrainingError> {
    let svd = x.clone().svd(true, true);
    let (Some(u), Some(v_t)) = (svd.u.as_ref(), svd.v_t.as_ref()) else {
        return Err(TrainingError::SingularSystem);
    };
    let s = &svd.singular_values;
    let s_max = s.iter().copied().fold(0.0, f64::max);
    let cutoff = s_max * f64::EPSILON * x.nrows().max(x.ncols()) as f64;
    let uty = u.tr_mul(y);
    let mut scaled = DVector::zeros(s.len());
    for i in 0..s.len() {
        if s[i] > cutoff {
            scaled[i] = uty[i] * s[i] / (s[i] * s[i] + alpha);
        }
    }
    let w = v_t.tr_mul(&scaled);
    if w.iter().all(|v| v.is_finite()) {
        Ok(w)
    } else {
        Err(TrainingError::SingularSystem)
    }
}

/// Ordinary least squares: ridge with `alpha = 0`.
pub fn fit_linear(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    fit_intercept: bool,
) -> Result<TrainedReadout, TrainingError> {
    fit_ridge(
        x,
        y,
        &RidgeParams {
            alpha: 0.0,
            fit_intercept,
            ..RidgeParams::default()
        },
    )
}
