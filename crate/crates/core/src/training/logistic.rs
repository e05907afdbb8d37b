use nalgebra::{DMatrix, DVector};

use super::{check_finite, LogisticParams, ModelKind, TrainedReadout, TrainingError};

pub(super) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Design matrix with a leading column of ones when an intercept is fitted.
fn design(x: &DMatrix<f64>, fit_intercept: bool) -> DMatrix<f64> {
    if fit_intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    }
}

/// Negative log-likelihood plus `alpha / 2 * |w|^2` (intercept unpenalised).
pub fn logistic_objective(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &DVector<f64>,
    intercept: f64,
    alpha: f64,
) -> f64 {
    let z = x * weights;
    let nll: f64 = z
        .iter()
        .zip(y.iter())
        .map(|(zi, yi)| {
            let zi = zi + intercept;
            // log(1 + e^z) - y z, evaluated without overflow
            let softplus = if zi > 0.0 {
                zi + (-zi).exp().ln_1p()
            } else {
                zi.exp().ln_1p()
            };
            softplus - yi * zi
        })
        .sum();
    nll + 0.5 * alpha * weights.norm_squared()
}

/// L2-regularised logistic regression by iteratively reweighted least
/// squares (Newton's method on the penalised log-likelihood).
///
/// Iteration stops once the largest coefficient update is below `tol`. If
/// that does not happen within `max_iter` iterations the error carries the
/// iterate with the lowest objective seen.
pub fn fit_logistic(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    p: &LogisticParams,
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
    check_finite(x, y)?;
    if let Some(bad) = y.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(TrainingError::NonBinaryTarget(*bad));
    }
    if !(p.alpha >= 0.0) {
        return Err(TrainingError::InvalidParams("alpha must be non-negative".into()));
    }

    let a = design(x, p.fit_intercept);
    let n_coef = a.ncols();
    let offset = usize::from(p.fit_intercept);
    let mut penalty = DVector::from_element(n_coef, p.alpha);
    if p.fit_intercept {
        penalty[0] = 0.0;
    }
    // A tiny ridge on the intercept keeps the Hessian invertible when the
    // classes are not represented on both sides.
    let jitter = 1e-12;

    let split = |beta: &DVector<f64>| -> (DVector<f64>, f64) {
        let w = beta.rows(offset, n_coef - offset).into_owned();
        let b = if p.fit_intercept { beta[0] } else { 0.0 };
        (w, b)
    };
    let readout = |beta: &DVector<f64>| {
        let (weights, intercept) = split(beta);
        TrainedReadout {
            weights,
            intercept,
            kind: ModelKind::Logistic,
        }
    };
    let objective = |beta: &DVector<f64>| {
        let (w, b) = split(beta);
        logistic_objective(x, y, &w, b, p.alpha)
    };

    let mut beta = DVector::zeros(n_coef);
    let mut best = (objective(&beta), beta.clone());
    let max_iter = p.max_iter.unwrap_or(100);
    for iter in 1..=max_iter {
        let z = &a * &beta;
        let prob = z.map(sigmoid);
        let weight = prob.map(|q| (q * (1.0 - q)).max(1e-12));
        let mut grad = a.tr_mul(&(&prob - y));
        grad += penalty.component_mul(&beta);

        let mut hess = a.tr_mul(&DMatrix::from_fn(a.nrows(), n_coef, |i, j| {
            a[(i, j)] * weight[i]
        }));
        for j in 0..n_coef {
            hess[(j, j)] += penalty[j] + jitter;
        }
        let step = match hess.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => hess
                .lu()
                .solve(&grad)
                .ok_or(TrainingError::SingularSystem)?,
        };
        beta -= &step;
        let obj = objective(&beta);
        if obj <= best.0 {
            best = (obj, beta.clone());
        }
        if step.amax() < p.tol {
            log::debug!("logistic fit converged after {iter} iterations");
            return Ok(readout(&beta));
        }
    }
    Err(TrainingError::NoConvergence {
        iterations: max_iter,
        best: Box::new(readout(&best.1)),
    })
}
