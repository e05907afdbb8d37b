use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;

/// Shockley diode in series with a resistor. The defaults are stand-ins
/// that put the knee of the curve in the volt range of a red LED.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeCircuitParams {
    /// Amperes.
    pub saturation_current: f64,
    /// Volts.
    pub thermal_voltage: f64,
    pub ideality: f64,
    /// Ohms.
    pub series_resistance: f64,
}

impl Default for DiodeCircuitParams {
    fn default() -> Self {
        Self {
            saturation_current: 1e-12,
            thermal_voltage: 0.02585,
            ideality: 1.8,
            series_resistance: 100.0,
        }
    }
}

impl DiodeCircuitParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let all_positive = [
            self.saturation_current,
            self.thermal_voltage,
            self.ideality,
            self.series_resistance,
        ]
        .iter()
        .all(|v| *v > 0.0 && v.is_finite());
        if all_positive {
            Ok(())
        } else {
            Err(SimError::InvalidParams(
                "diode parameters must be positive".into(),
            ))
        }
    }
}

/// Voltage across diode and resistor at forward current `i`.
pub fn diode_voltage(i: f64, p: &DiodeCircuitParams) -> f64 {
    p.ideality * p.thermal_voltage * (i / p.saturation_current).ln_1p() + i * p.series_resistance
}

/// Default range, in amperes, from which window bounds are drawn.
pub const DEFAULT_CURRENT_RANGE: (f64, f64) = (0.0, 0.01);

/// Operating windows of a time-multiplexed single-input device: each window
/// is one virtual node driven by the input mapped onto its current range.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexWindows {
    pub bounds: Vec<(f64, f64)>,
    pub seed: u64,
}

impl MultiplexWindows {
    /// Draws `n_windows` bound pairs uniformly from `range`.
    pub fn random(n_windows: usize, seed: u64, range: (f64, f64)) -> Result<Self, SimError> {
        let (lo, hi) = range;
        if n_windows == 0 || !(lo >= 0.0 && lo < hi) {
            return Err(SimError::InvalidParams(format!(
                "need n_windows >= 1 and 0 <= low < high, got {n_windows} windows in [{lo}, {hi}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bounds = Vec::with_capacity(n_windows);
        while bounds.len() < n_windows {
            let a = rng.random_range(lo..hi);
            let b = rng.random_range(lo..hi);
            if a != b {
                bounds.push((a.min(b), a.max(b)));
            }
        }
        Ok(Self { bounds, seed })
    }

    pub fn n_windows(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.bounds.is_empty() {
            return Err(SimError::InvalidParams("no windows".into()));
        }
        for (j, (lo, hi)) in self.bounds.iter().enumerate() {
            if !(*lo >= 0.0 && lo < hi && hi.is_finite()) {
                return Err(SimError::InvalidParams(format!(
                    "window {j} has invalid bounds ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Column `j`, row `t`: `u(t)` mapped affinely from the input's range onto
/// window `j`. A constant input sits at each window's lower bound.
pub fn map_input_to_currents(u: &[f64], w: &MultiplexWindows) -> Result<DMatrix<f64>, SimError> {
    w.validate()?;
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(DMatrix::from_fn(u.len(), w.n_windows(), |t, j| {
        let (i_lo, i_hi) = w.bounds[j];
        let frac = if span > 0.0 { (u[t] - lo) / span } else { 0.0 };
        i_lo + frac * (i_hi - i_lo)
    }))
}

/// Memoryless readout: each row is the instantaneous voltage of every window.
pub fn simulate_diode(
    u: &[f64],
    w: &MultiplexWindows,
    p: &DiodeCircuitParams,
) -> Result<DMatrix<f64>, SimError> {
    p.validate()?;
    let currents = map_input_to_currents(u, w)?;
    Ok(currents.map(|i| diode_voltage(i, p)))
}
