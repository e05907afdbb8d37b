//! Reservoir quality metrics: nonlinearity and linear memory capacity.
//!
//! Both metrics fit linear estimators in-sample and score them with the
//! squared correlation `R^2[a, b] = cov(a, b)^2 / (var(a) var(b))`.
//!
//! * Nonlinearity of channel `n` is `1 - R^2[y_hat_n, y_n]`, where `y_hat_n`
//!   is the best affine estimate of the channel from the scalar input `u(t)`.
//! * Linear memory capacity sums, over lags `tau = 1..=kmax`, the `R^2`
//!   between `u(t - tau)` and its ridge reconstruction from the full readout
//!   row `x(t)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::training::{fit_linear, fit_ridge, RidgeParams, TrainingError};

/// Ridge penalty of the memory-capacity estimators.
pub const MC_RIDGE_ALPHA: f64 = 1e-6;
pub const DEFAULT_KMAX: usize = 25;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("input has {input} samples but the readouts have {rows} rows")]
    LengthMismatch { input: usize, rows: usize },
    #[error("need at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("kmax {kmax} needs more than {} rows, got {rows}", kmax + 2)]
    TooFewRows { kmax: usize, rows: usize },
    #[error("kmax must be at least 1")]
    ZeroKmax,
    #[error(transparent)]
    Training(#[from] TrainingError),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

/// Squared correlation of two series.
///
/// A constant series has no defined correlation; its score is 0 and
/// `degenerate` is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RSquared {
    pub value: f64,
    pub degenerate: bool,
}

fn is_constant(v: &[f64]) -> bool {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = lo.abs().max(hi.abs());
    hi - lo <= 4.0 * f64::EPSILON * scale
}

/// `cov(a, b)^2 / (var(a) var(b))` with population moments, clamped to [0, 1].
pub fn r_squared(a: &[f64], b: &[f64]) -> Result<RSquared> {
    if a.len() != b.len() {
        return Err(MetricsError::LengthMismatch {
            input: a.len(),
            rows: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(MetricsError::TooShort(a.len()));
    }
    if is_constant(a) || is_constant(b) {
        log::warn!("R^2 of a constant series is undefined; scoring 0");
        return Ok(RSquared {
            value: 0.0,
            degenerate: true,
        });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    Ok(RSquared {
        value: (cov * cov / (va * vb)).clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Input series paired with the readouts it produced, row by row.
#[derive(Debug, Clone, Copy)]
pub struct MetricsInput<'a> {
    input: &'a [f64],
    readouts: &'a DMatrix<f64>,
}

impl<'a> MetricsInput<'a> {
    pub fn new(input: &'a [f64], readouts: &'a DMatrix<f64>) -> Result<Self> {
        if input.len() != readouts.nrows() {
            return Err(MetricsError::LengthMismatch {
                input: input.len(),
                rows: readouts.nrows(),
            });
        }
        if input.len() < 2 {
            return Err(MetricsError::TooShort(input.len()));
        }
        Ok(Self { input, readouts })
    }

    pub fn input(&self) -> &[f64] {
        self.input
    }

    pub fn readouts(&self) -> &DMatrix<f64> {
        self.readouts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearityReport {
    pub mean: f64,
    pub per_channel: Vec<f64>,
}

/// Per-channel and mean nonlinearity. Constant channels score 0.
pub fn nonlinearity(m: &MetricsInput<'_>) -> Result<NonlinearityReport> {
    let u = DMatrix::from_column_slice(m.input.len(), 1, m.input);
    let per_channel = (0..m.readouts.ncols())
        .into_par_iter()
        .map(|j| {
            let y: DVector<f64> = m.readouts.column(j).into_owned();
            if is_constant(y.as_slice()) {
                return Ok(0.0);
            }
            let fit = fit_linear(&u, &y, true)?;
            let y_hat = fit.predict(&u)?;
            Ok(1.0 - r_squared(y_hat.as_slice(), y.as_slice())?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = if per_channel.is_empty() {
        0.0
    } else {
        per_channel.iter().sum::<f64>() / per_channel.len() as f64
    };
    Ok(NonlinearityReport { mean, per_channel })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryCapacityReport {
    /// Sum of `per_lag`.
    pub total: f64,
    /// Entry `i` scores lag `i + 1`.
    pub per_lag: Vec<f64>,
    pub kmax: usize,
    pub auto_correlation_removed: bool,
}

fn check_kmax(kmax: usize, rows: usize) -> Result<()> {
    if kmax == 0 {
        return Err(MetricsError::ZeroKmax);
    }
    if rows <= kmax + 2 {
        return Err(MetricsError::TooFewRows { kmax, rows });
    }
    Ok(())
}

/// Entry `i` is `R^2[u(t), u(t - (i + 1))]` over the overlapping samples.
pub fn remove_auto_correlation_profile(u: &[f64], kmax: usize) -> Result<Vec<f64>> {
    check_kmax(kmax, u.len())?;
    (1..=kmax)
        .map(|lag| Ok(r_squared(&u[lag..], &u[..u.len() - lag])?.value))
        .collect()
}

/// Linear memory capacity up to lag `kmax`.
///
/// With `remove_auto_correlation` each lag score is reduced by the input's
/// own lag correlation, which can make scores negative.
pub fn linear_memory_capacity(
    m: &MetricsInput<'_>,
    kmax: usize,
    remove_auto_correlation: bool,
) -> Result<MemoryCapacityReport> {
    let rows = m.readouts.nrows();
    check_kmax(kmax, rows)?;
    let u = m.input;
    let params = RidgeParams::with_alpha(MC_RIDGE_ALPHA);
    let mut per_lag = (1..=kmax)
        .into_par_iter()
        .map(|lag| {
            let kept = rows - lag;
            let x = m.readouts.rows(lag, kept).into_owned();
            let target = DVector::from_column_slice(&u[..kept]);
            let fit = fit_ridge(&x, &target, &params)?;
            let estimate = fit.predict(&x)?;
            Ok(r_squared(estimate.as_slice(), target.as_slice())?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    if remove_auto_correlation {
        let profile = remove_auto_correlation_profile(u, kmax)?;
        for (score, own) in per_lag.iter_mut().zip(profile) {
            *score -= own;
        }
    }
    let total = per_lag.iter().sum();
    Ok(MemoryCapacityReport {
        total,
        per_lag,
        kmax,
        auto_correlation_removed: remove_auto_correlation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn white_noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn sine(n: usize, period: usize) -> Vec<f64> {
        (0..n)
            .map(|i| (2.0 * PI * i as f64 / period as f64).sin())
            .collect()
    }

    #[test]
    fn r_squared_basics() {
        let a = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert!((r_squared(&a, &a).unwrap().value - 1.0).abs() < 1e-12);
        let b: Vec<f64> = a.iter().map(|v| -2.0 * v + 7.0).collect();
        assert!((r_squared(&a, &b).unwrap().value - 1.0).abs() < 1e-12);
        let c = r_squared(&a, &[2.0; 5]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.value, 0.0);
        assert!(r_squared(&a, &a[..3]).is_err());
    }

    #[test]
    fn independent_noise_has_small_r_squared() {
        let a = white_noise(10_000, 1);
        let b = white_noise(10_000, 2);
        assert!(r_squared(&a, &b).unwrap().value < 0.01);
    }

    #[test]
    fn linear_reservoir_has_zero_nonlinearity() {
        let u = sine(200, 50);
        let m = DMatrix::from_fn(200, 2, |i, j| if j == 0 { u[i] } else { 2.0 * u[i] + 3.0 });
        let nl = nonlinearity(&MetricsInput::new(&u, &m).unwrap()).unwrap();
        assert!(nl.mean <= 1e-10, "{}", nl.mean);
    }

    /// Best affine fit of `y` on `x` by closed-form simple regression.
    fn line_fit_r_squared(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let fit: Vec<f64> = x.iter().map(|a| my + slope * (a - mx)).collect();
        let ss_res: f64 = y.iter().zip(&fit).map(|(a, b)| (a - b).powi(2)).sum();
        let ss_tot: f64 = y.iter().map(|a| (a - my).powi(2)).sum();
        1.0 - ss_res / ss_tot
    }

    #[test]
    fn squared_sine_is_nonlinear() {
        let u = sine(50, 50);
        let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
        let m = DMatrix::from_column_slice(50, 1, &sq);
        let nl = nonlinearity(&MetricsInput::new(&u, &m).unwrap()).unwrap();
        let oracle = 1.0 - line_fit_r_squared(&u, &sq);
        assert!((nl.per_channel[0] - oracle).abs() < 1e-9);
        assert!(nl.per_channel[0] > 0.5);
    }

    #[test]
    fn constant_channel_scores_zero() {
        let u = sine(40, 20);
        let m = DMatrix::from_fn(40, 2, |i, j| if j == 0 { 4.0 } else { u[i].powi(3) });
        let nl = nonlinearity(&MetricsInput::new(&u, &m).unwrap()).unwrap();
        assert_eq!(nl.per_channel[0], 0.0);
    }

    #[test]
    fn delay_line_memory() {
        let n = 600;
        let u = white_noise(n + 2, 3);
        // row t holds u(t - 1), u(t - 2)
        let input = &u[2..];
        let m = DMatrix::from_fn(n, 2, |t, j| u[t + 1 - j]);
        let report =
            linear_memory_capacity(&MetricsInput::new(input, &m).unwrap(), 12, false).unwrap();
        assert!(report.per_lag[0] > 0.99 && report.per_lag[1] > 0.99);
        assert!(report.per_lag[2..].iter().all(|v| *v < 0.05));
        assert!(report.total >= 1.98);
        assert_eq!(report.total, report.per_lag.iter().sum::<f64>());
    }

    #[test]
    fn memoryless_readouts_have_little_memory() {
        let u = white_noise(1000, 4);
        let m = DMatrix::from_fn(1000, 3, |t, j| match j {
            0 => u[t],
            1 => u[t].powi(2),
            _ => u[t].tanh(),
        });
        let r = linear_memory_capacity(&MetricsInput::new(&u, &m).unwrap(), 25, false).unwrap();
        assert!(r.total < 0.2, "{}", r.total);
    }

    #[test]
    fn autocorrelation_profile() {
        let noise = white_noise(5000, 5);
        let p = remove_auto_correlation_profile(&noise, 10).unwrap();
        assert!(p.iter().all(|v| *v < 0.01 && *v >= 0.0));
        let square: Vec<f64> = (0..400).map(|i| if i % 20 < 10 { 1.0 } else { 0.0 }).collect();
        let p = remove_auto_correlation_profile(&square, 25).unwrap();
        assert!((p[19] - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn removal_subtracts_profile() {
        let u = sine(300, 37);
        let m = DMatrix::from_fn(300, 3, |t, j| (u[t] * (j + 1) as f64).tanh());
        let mi = MetricsInput::new(&u, &m).unwrap();
        let raw = linear_memory_capacity(&mi, 8, false).unwrap();
        let removed = linear_memory_capacity(&mi, 8, true).unwrap();
        let profile = remove_auto_correlation_profile(&u, 8).unwrap();
        for k in 0..8 {
            assert!((raw.per_lag[k] - profile[k] - removed.per_lag[k]).abs() < 1e-15);
        }
        assert!(removed.auto_correlation_removed);
    }

    #[test]
    fn guards() {
        let u = [0.0, 1.0, 0.5];
        let m = DMatrix::zeros(3, 1);
        let mi = MetricsInput::new(&u, &m).unwrap();
        assert!(matches!(
            linear_memory_capacity(&mi, 1, false),
            Err(MetricsError::TooFewRows { .. })
        ));
        assert!(matches!(
            linear_memory_capacity(&mi, 0, false),
            Err(MetricsError::ZeroKmax)
        ));
        assert!(matches!(
            MetricsInput::new(&u[..2], &m),
            Err(MetricsError::LengthMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn nonlinearity_bounded_and_affine_invariant(
            seed in 0u64..500,
            scale in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            shift in -10.0f64..10.0,
        ) {
            let u = white_noise(80, seed);
            let m = DMatrix::from_fn(80, 2, |t, j| if j == 0 { (2.0 * u[t]).sin() } else { u[t].powi(2) + 0.1 * u[t] });
            let moved = DMatrix::from_fn(80, 2, |t, j| scale * m[(t, j)] + shift);
            let a = nonlinearity(&MetricsInput::new(&u, &m).unwrap()).unwrap();
            let b = nonlinearity(&MetricsInput::new(&u, &moved).unwrap()).unwrap();
            for (x, y) in a.per_channel.iter().zip(&b.per_channel) {
                prop_assert!((-1e-9..=1.0 + 1e-9).contains(x));
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn memory_capacity_bounds(seed in 0u64..200) {
            let u = white_noise(120, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1000);
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            // A small leaky reservoir.
            let mut state = [0.0f64; 4];
            let m = DMatrix::from_fn(120, 4, |_, _| 0.0);
            let mut m = m;
            for t in 0..120 {
                for j in 0..4 {
                    state[j] = (0.6 * state[(j + 1) % 4] + w[j] * u[t]).tanh();
                    m[(t, j)] = state[j];
                }
            }
            let mi = MetricsInput::new(&u, &m).unwrap();
            let r = linear_memory_capacity(&mi, 10, false).unwrap();
            prop_assert!(r.per_lag.iter().all(|v| (0.0..=1.0 + 1e-9).contains(v)));
            prop_assert_eq!(r.total, r.per_lag.iter().sum::<f64>());

            let dup = m.clone().insert_column(4, 0.0);
            let mut dup = dup;
            dup.set_column(4, &m.column(0));
            let r_dup = linear_memory_capacity(&MetricsInput::new(&u, &dup).unwrap(), 10, false).unwrap();
            prop_assert!(r_dup.total >= r.total - 1e-9);
        }
    }
}
