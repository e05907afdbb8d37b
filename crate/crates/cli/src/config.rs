//! Run configuration file.

use std::fs;
use std::path::{Path, PathBuf};

use prc_core::metrics::DEFAULT_KMAX;
use prc_core::physics_sim::INPUT_FILE;
use prc_core::preprocess::{PreprocessError, ProcessParams};
use prc_core::targets::MackeyGlassParams;
use prc_core::training::{ErrorType, ModelSpec, RcParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub process: ProcessParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rc: Option<RcSection>,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_prefix() -> String {
    "scan".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Square,
    Sawtooth,
    Sine,
    MackeyGlass,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub kind: TargetKind,
    /// Defaults to the number of reservoir rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_per_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mackey_glass: Option<MackeyGlassParams>,
    /// Rescale the target to [0, 1].
    #[serde(default)]
    pub normalize: bool,
}

/// `tau` is signed here so that a negative value is reported against its
/// key rather than as a parse error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcSection {
    #[serde(default)]
    pub tau: i64,
    #[serde(default = "default_test_size")]
    pub test_size: f64,
    #[serde(default = "default_error_type")]
    pub error_type: ErrorType,
}

fn default_test_size() -> f64 {
    0.3
}

fn default_error_type() -> ErrorType {
    ErrorType::Mse
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_kmax")]
    pub kmax: usize,
    #[serde(default)]
    pub remove_auto_correlation: bool,
    /// Defaults to the `input.txt` written by the simulators into the data
    /// directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_file: Option<PathBuf>,
}

fn default_kmax() -> usize {
    DEFAULT_KMAX
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            enabled: false,
            kmax: DEFAULT_KMAX,
            remove_auto_correlation: false,
            input_file: None,
        }
    }
}

/// A parsed configuration plus the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {reason}"))
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn data_dir(&self) -> PathBuf {
        self.resolve(&self.config.data.dir)
    }

    pub fn metrics_input(&self) -> PathBuf {
        match &self.config.metrics.input_file {
            Some(p) => self.resolve(p),
            None => self.data_dir().join(INPUT_FILE),
        }
    }

    /// Checks the sections a metrics-only run needs.
    pub fn validate_common(&self) -> Result<(), CliError> {
        let c = &self.config;
        if c.data.prefix.is_empty() {
            return Err(invalid("data.prefix", "must not be empty"));
        }
        c.process.validate().map_err(|e| match e {
            PreprocessError::InvalidParams { field, reason } => {
                invalid(&format!("process.{field}"), reason)
            }
            other => invalid("process", other),
        })?;
        if c.metrics.kmax == 0 {
            return Err(invalid("metrics.kmax", "must be at least 1"));
        }
        Ok(())
    }

    /// Checks everything a training run needs and returns its settings.
    pub fn validate_run(&self) -> Result<RcParams, CliError> {
        self.validate_common()?;
        let c = &self.config;
        let target = c.target.as_ref().ok_or_else(|| invalid("target", "section missing"))?;
        validate_target(target)?;
        let model = c.model.clone().ok_or_else(|| invalid("model", "section missing"))?;
        validate_model(&model)?;
        let rc = c.rc.as_ref().ok_or_else(|| invalid("rc", "section missing"))?;
        if rc.tau < 0 {
            return Err(invalid("rc.tau", format!("must be non-negative, got {}", rc.tau)));
        }
        if !(rc.test_size > 0.0 && rc.test_size < 1.0) {
            return Err(invalid(
                "rc.test_size",
                format!("must lie in (0, 1), got {}", rc.test_size),
            ));
        }
        Ok(RcParams {
            model,
            tau: rc.tau as usize,
            test_size: rc.test_size,
            error_type: rc.error_type,
        })
    }
}

fn validate_target(t: &TargetSection) -> Result<(), CliError> {
    if t.length == Some(0) {
        return Err(invalid("target.length", "must be at least 1"));
    }
    match t.kind {
        TargetKind::Square | TargetKind::Sawtooth => match t.num_periods {
            None => return Err(invalid("target.num_periods", "required for this kind")),
            Some(0) => return Err(invalid("target.num_periods", "must be at least 1")),
            Some(_) => {}
        },
        TargetKind::Sine => match (t.num_periods, t.points_per_period) {
            (None, None) => {
                return Err(invalid(
                    "target.num_periods",
                    "required for a sine unless points_per_period is set",
                ))
            }
            (Some(0), _) => return Err(invalid("target.num_periods", "must be at least 1")),
            (_, Some(0)) => return Err(invalid("target.points_per_period", "must be at least 1")),
            _ => {}
        },
        TargetKind::File => {
            if t.file.is_none() {
                return Err(invalid("target.file", "required for kind file"));
            }
        }
        TargetKind::MackeyGlass => {
            let p = t.mackey_glass.clone().unwrap_or_default();
            let probe = MackeyGlassParams { length: 1, washout: 0, ..p };
            prc_core::targets::generate_mackey_glass(&probe)
                .map_err(|e| invalid("target.mackey_glass", e))?;
        }
    }
    Ok(())
}

fn validate_model(m: &ModelSpec) -> Result<(), CliError> {
    let (alpha, tol, max_iter) = match m {
        ModelSpec::Ridge(p) => (p.alpha, p.tol, p.max_iter),
        ModelSpec::Logistic(p) => (p.alpha, p.tol, p.max_iter),
        ModelSpec::Linear { .. } => return Ok(()),
    };
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(invalid("model.alpha", format!("must be non-negative, got {alpha}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("model.tol", format!("must be positive, got {tol}")));
    }
    if max_iter == Some(0) {
        return Err(invalid("model.max_iter", "must be at least 1"));
    }
    Ok(())
}
