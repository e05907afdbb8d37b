//! Readout training: the linear layer mapping reservoir states to outputs.
//!
//! A run pairs reservoir row `t` with target `t + tau`, splits the aligned
//! rows chronologically into train and test blocks, fits the readout on the
//! train block and scores both blocks.

mod logistic;
mod ridge;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use logistic::{fit_logistic, logistic_objective};
pub use ridge::{fit_linear, fit_ridge};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("normal equations are singular")]
    SingularSystem,
    #[error("logistic targets must be 0 or 1, found {0}")]
    NonBinaryTarget(f64),
    #[error("logistic fit did not converge in {iterations} iterations")]
    NoConvergence {
        iterations: usize,
        best: Box<TrainedReadout>,
    },
    #[error("tau {tau} must be smaller than the number of rows {rows}")]
    TauTooLarge { tau: usize, rows: usize },
    #[error("{rows} rows leave an empty train or test block")]
    TooFewRows { rows: usize },
    #[error("matrix has {rows} rows but {targets} targets")]
    LengthMismatch { rows: usize, targets: usize },
    #[error("feature count {expected} expected, got {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

fn default_alpha() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RidgeParams {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub fit_intercept: bool,
    /// Unused by the direct solver; kept so configs mirror the logistic model.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            fit_intercept: true,
            tol: default_tol(),
            max_iter: None,
        }
    }
}

impl RidgeParams {
    pub fn with_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    /// L2 penalty on the weights.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub fit_intercept: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default)]
    pub max_iter: Option<usize>,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            alpha: default_alpha(),
            fit_intercept: true,
            tol: default_tol(),
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ridge,
    Linear,
    Logistic,
}

/// Readout model and its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelSpec {
    Ridge(RidgeParams),
    Linear {
        #[serde(default = "default_true")]
        fit_intercept: bool,
    },
    Logistic(LogisticParams),
}

impl ModelSpec {
    /// Fits the model. A logistic fit that fails to converge is reported
    /// through the log and its best iterate is used.
    pub fn fit(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<TrainedReadout, TrainingError> {
        match self {
            ModelSpec::Ridge(p) => fit_ridge(x, y, p),
            ModelSpec::Linear { fit_intercept } => fit_linear(x, y, *fit_intercept),
            ModelSpec::Logistic(p) => match fit_logistic(x, y, p) {
                Err(TrainingError::NoConvergence { iterations, best }) => {
                    log::warn!(
                        "logistic readout did not converge in {iterations} iterations; using best iterate"
                    );
                    Ok(*best)
                }
                other => other,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorType {
    #[serde(rename = "MSE")]
    Mse,
    #[serde(rename = "MAE")]
    Mae,
}

/// Settings of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RcParams {
    pub model: ModelSpec,
    pub tau: usize,
    pub test_size: f64,
    pub error_type: ErrorType,
}

/// Fitted readout `y = weights . x + intercept` (through the logistic link
/// for [`ModelKind::Logistic`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedReadout {
    pub weights: DVector<f64>,
    pub intercept: f64,
    pub kind: ModelKind,
}

impl TrainedReadout {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, TrainingError> {
        if x.ncols() != self.weights.len() {
            return Err(TrainingError::FeatureMismatch {
                expected: self.weights.len(),
                got: x.ncols(),
            });
        }
        let linear = (x * &self.weights).add_scalar(self.intercept);
        Ok(match self.kind {
            ModelKind::Logistic => linear.map(logistic::sigmoid),
            ModelKind::Ridge | ModelKind::Linear => linear,
        })
    }

    /// Class labels from thresholding the prediction at 0.5.
    pub fn predict_labels(&self, x: &DMatrix<f64>) -> Result<DVector<f64>, TrainingError> {
        Ok(self.predict(x)?.map(|p| if p >= 0.5 { 1.0 } else { 0.0 }))
    }
}

/// Rows and targets of one block of a chronological split.
#[derive(Debug, Clone, PartialEq)]
pub struct DataBlock {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Outcome of a training run; field names follow the results dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct RcResults {
    pub x_train: DMatrix<f64>,
    pub y_train: DVector<f64>,
    pub train_pred: DVector<f64>,
    pub x_test: DMatrix<f64>,
    pub y_test: DVector<f64>,
    pub test_pred: DVector<f64>,
    pub train_error: f64,
    pub test_error: f64,
    pub readout: TrainedReadout,
}

pub(crate) fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(), TrainingError> {
    if x.iter().chain(y.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(TrainingError::NonFiniteInput)
    }
}

/// Pairs row `t` of `x` with `y[t + tau]`.
pub fn align_tau(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    tau: usize,
) -> Result<(DMatrix<f64>, DVector<f64>), TrainingError> {
    let rows = x.nrows();
    if rows != y.len() {
        return Err(TrainingError::LengthMismatch {
            rows,
            targets: y.len(),
        });
    }
    if tau >= rows {
        return Err(TrainingError::TauTooLarge { tau, rows });
    }
    let kept = rows - tau;
    Ok((
        x.rows(0, kept).into_owned(),
        y.rows(tau, kept).into_owned(),
    ))
}

/// Number of train rows for `rows` aligned rows: `ceil((1 - test_size) * rows)`.
pub fn train_rows(rows: usize, test_size: f64) -> usize {
    // The small offset keeps products such as 0.7 * 10 from rounding up to 8.
    (((1.0 - test_size) * rows as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Splits without shuffling: the first rows train, the rest test.
pub fn split_chronological(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    test_size: f64,
) -> Result<(DataBlock, DataBlock), TrainingError> {
    if !(test_size > 0.0 && test_size < 1.0) {
        return Err(TrainingError::InvalidParams(format!(
            "test_size must lie in (0, 1), got {test_size}"
        )));
    }
    let rows = x.nrows();
    if rows != y.len() {
        return Err(TrainingError::LengthMismatch {
            rows,
            targets: y.len(),
        });
    }
    let n_train = train_rows(rows, test_size);
    if n_train == 0 || n_train >= rows {
        return Err(TrainingError::TooFewRows { rows });
    }
    let n_test = rows - n_train;
    Ok((
        DataBlock {
            x: x.rows(0, n_train).into_owned(),
            y: y.rows(0, n_train).into_owned(),
        },
        DataBlock {
            x: x.rows(n_train, n_test).into_owned(),
            y: y.rows(n_train, n_test).into_owned(),
        },
    ))
}

pub fn error(pred: &DVector<f64>, truth: &DVector<f64>, kind: ErrorType) -> f64 {
    assert_eq!(pred.len(), truth.len(), "prediction/target length mismatch");
    let n = pred.len() as f64;
    let residuals = pred.iter().zip(truth.iter()).map(|(p, t)| p - t);
    match kind {
        ErrorType::Mse => residuals.map(|r| r * r).sum::<f64>() / n,
        ErrorType::Mae => residuals.map(f64::abs).sum::<f64>() / n,
    }
}

/// Aligns, splits, fits and scores in one pass.
pub fn train_and_evaluate(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    params: &RcParams,
) -> Result<RcResults, TrainingError> {
    let (xa, ya) = align_tau(x, y, params.tau)?;
    let (train, test) = split_chronological(&xa, &ya, params.test_size)?;
    let readout = params.model.fit(&train.x, &train.y)?;
    let train_pred = readout.predict(&train.x)?;
    let test_pred = readout.predict(&test.x)?;
    let train_error = error(&train_pred, &train.y, params.error_type);
    let test_error = error(&test_pred, &test.y, params.error_type);
    Ok(RcResults {
        x_train: train.x,
        y_train: train.y,
        train_pred,
        x_test: test.x,
        y_test: test.y,
        test_pred,
        train_error,
        test_error,
        readout,
    })
}
