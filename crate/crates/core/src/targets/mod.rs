//! Input and target signal generation.
//!
//! Periodic generators place exactly `num_periods` periods across `length`
//! samples. Phase is computed with integer arithmetic, so the waveforms do
//! not drift with rounding. Square and sawtooth waves take values in
//! `[0, 1]`, the square wave starting high.

mod mackey_glass;

use std::fs;
use std::path::Path;

use thiserror::Error;

pub use mackey_glass::{generate_mackey_glass, MackeyGlassParams};

#[derive(Debug, Error)]
pub enum TargetError {
    #[error("need length >= 2 * num_periods >= 2, got length {length}, num_periods {num_periods}")]
    BadPeriodCount { length: usize, num_periods: usize },
    #[error("length {length} conflicts with {num_periods} periods of {points_per_period} points")]
    LengthConflict {
        length: usize,
        num_periods: usize,
        points_per_period: usize,
    },
    #[error("invalid Mackey-Glass parameters: {0}")]
    InvalidMackeyGlass(String),
    #[error("series {name:?} is empty")]
    Empty { name: String },
    #[error("series {name:?} has a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
    #[error("{path}:{line}: invalid number {text:?}")]
    Parse {
        path: String,
        line: usize,
        text: String,
    },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A named, finite, non-empty real sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSeries {
    pub name: String,
    pub values: Vec<f64>,
}

impl SignalSeries {
    pub fn new(name: &str, values: Vec<f64>) -> Result<Self, TargetError> {
        if values.is_empty() {
            return Err(TargetError::Empty { name: name.into() });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(TargetError::NonFinite {
                name: name.into(),
                index,
            });
        }
        Ok(Self {
            name: name.to_string(),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

fn check_periods(length: usize, num_periods: usize) -> Result<(), TargetError> {
    if num_periods == 0 || length < 2 * num_periods {
        return Err(TargetError::BadPeriodCount {
            length,
            num_periods,
        });
    }
    Ok(())
}

/// Phase numerator of sample `i`: `frac(i / P) = phase / length`.
fn phase(i: usize, length: usize, num_periods: usize) -> usize {
    (i * num_periods) % length
}

pub fn generate_square_wave(length: usize, num_periods: usize) -> Result<SignalSeries, TargetError> {
    check_periods(length, num_periods)?;
    let values = (0..length)
        .map(|i| {
            if 2 * phase(i, length, num_periods) < length {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    SignalSeries::new("square", values)
}

pub fn generate_sawtooth_wave(
    length: usize,
    num_periods: usize,
) -> Result<SignalSeries, TargetError> {
    check_periods(length, num_periods)?;
    let values = (0..length)
        .map(|i| phase(i, length, num_periods) as f64 / length as f64)
        .collect();
    SignalSeries::new("sawtooth", values)
}

/// `sin(2 pi i / P)`. With `points_per_period`, the length is
/// `num_periods * points_per_period`; a nonzero `length` must then agree.
pub fn generate_sine_wave(
    length: usize,
    num_periods: usize,
    points_per_period: Option<usize>,
) -> Result<SignalSeries, TargetError> {
    let length = match points_per_period {
        Some(ppp) => {
            let derived = num_periods * ppp;
            if length != 0 && length != derived {
                return Err(TargetError::LengthConflict {
                    length,
                    num_periods,
                    points_per_period: ppp,
                });
            }
            derived
        }
        None => length,
    };
    check_periods(length, num_periods)?;
    let values = (0..length)
        .map(|i| {
            let frac = phase(i, length, num_periods) as f64 / length as f64;
            (2.0 * std::f64::consts::PI * frac).sin()
        })
        .collect();
    SignalSeries::new("sine", values)
}

/// Affine map of the series onto `[0, 1]`; a constant series becomes zeros.
pub fn normalize_list(s: &SignalSeries) -> SignalSeries {
    let lo = s.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = s.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = s
        .values
        .iter()
        .map(|v| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 })
        .collect();
    SignalSeries {
        name: s.name.clone(),
        values,
    }
}

/// Reads one value per line; blank lines are ignored.
pub fn load_series(path: &Path) -> Result<SignalSeries, TargetError> {
    let shown = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| TargetError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| TargetError::Parse {
            path: shown.clone(),
            line: i + 1,
            text: line.to_string(),
        })?;
        values.push(v);
    }
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("series");
    SignalSeries::new(name, values)
}

/// Writes one value per line using the shortest round-trip decimal form.
pub fn save_series(path: &Path, s: &SignalSeries) -> Result<(), TargetError> {
    let mut text = String::with_capacity(s.len() * 20);
    for v in &s.values {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).map_err(|source| TargetError::Io {
        path: path.display().to_string(),
        source,
    })
}
