use nalgebra::DMatrix;

use super::diode::{diode_voltage, map_input_to_currents, DiodeCircuitParams, MultiplexWindows};
use super::SimError;

/// Diode circuit with a capacitor across the diode junction.
///
/// The window voltage drives the node through the series resistor while
/// the diode drains it:
///
/// `C dV/dt = (V_drive - V) / R - I_s (exp(V / (n V_t)) - 1)`
///
/// At small `V` the diode term vanishes and `V` relaxes towards the drive
/// with time constant `R C`. In steady state `V` is the junction voltage of
/// the window current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcCircuitParams {
    pub diode: DiodeCircuitParams,
    /// Farads.
    pub capacitance: f64,
    /// Integration step in seconds.
    pub timestep: f64,
    /// Integration steps each window's drive is held for.
    pub steps_per_window: usize,
}

impl Default for RcCircuitParams {
    fn default() -> Self {
        Self {
            diode: DiodeCircuitParams::default(),
            capacitance: 1e-4,
            timestep: 1e-5,
            steps_per_window: 50,
        }
    }
}

impl RcCircuitParams {
    pub fn time_constant(&self) -> f64 {
        self.diode.series_resistance * self.capacitance
    }

    /// Relaxation time at forward current `i`: `C` times the series
    /// resistor in parallel with the diode's small-signal resistance.
    pub fn local_time_constant(&self, i: f64) -> f64 {
        let d = &self.diode;
        let r_diode = d.ideality * d.thermal_voltage / (i.max(0.0) + d.saturation_current);
        self.capacitance * d.series_resistance * r_diode / (d.series_resistance + r_diode)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.diode.validate()?;
        if !(self.capacitance > 0.0 && self.capacitance.is_finite()) {
            return Err(SimError::InvalidParams("capacitance must be positive".into()));
        }
        if !(self.timestep > 0.0) || self.steps_per_window == 0 {
            return Err(SimError::InvalidParams(
                "timestep and steps_per_window must be positive".into(),
            ));
        }
        self.check_timestep(self.time_constant())
    }

    fn check_timestep(&self, tau: f64) -> Result<(), SimError> {
        let limit = tau / 5.0;
        if self.timestep > limit {
            return Err(SimError::UnstableTimestep {
                timestep: self.timestep,
                limit,
            });
        }
        Ok(())
    }
}

/// Junction voltage at forward current `i`, the steady state of the
/// capacitor node.
pub fn junction_voltage(i: f64, p: &DiodeCircuitParams) -> f64 {
    p.ideality * p.thermal_voltage * (i / p.saturation_current).ln_1p()
}

/// Integrates the node voltage with Heun's method, holding each `drive`
/// voltage for `steps_per_window` steps and recording `V` at the end of
/// each hold.
pub fn integrate_rc(drive: &[f64], v0: f64, p: &RcCircuitParams) -> Result<Vec<f64>, SimError> {
    p.validate()?;
    let d = &p.diode;
    let nvt = d.ideality * d.thermal_voltage;
    let h = p.timestep;
    let mut v = v0;
    let mut out = Vec::with_capacity(drive.len());
    for &source in drive {
        let f = |v: f64| {
            ((source - v) / d.series_resistance - d.saturation_current * (v / nvt).exp_m1())
                / p.capacitance
        };
        for _ in 0..p.steps_per_window {
            let k1 = f(v);
            let k2 = f(v + h * k1);
            v += h / 2.0 * (k1 + k2);
        }
        out.push(v);
    }
    Ok(out)
}

/// Time-multiplexed run: for every input sample the windows are driven one
/// after another through the same capacitor, so charge left by one window
/// carries into the next and into the next sample. Entry `(t, j)` is the
/// node voltage at the end of window `j` during sample `t`.
///
/// Window `j` is driven with the voltage that passes its mapped current
/// through the diode and resistor in steady state. The capacitor starts at
/// the steady state of the first window.
pub fn simulate_rc_circuit(
    u: &[f64],
    w: &MultiplexWindows,
    p: &RcCircuitParams,
) -> Result<DMatrix<f64>, SimError> {
    p.validate()?;
    if u.is_empty() {
        return Err(SimError::EmptyInput);
    }
    let currents = map_input_to_currents(u, w)?;
    // The diode's small-signal resistance shortens the relaxation time at
    // the largest current; the step has to resolve that too.
    p.check_timestep(p.local_time_constant(currents.max()))?;
    // Row-major flattening gives the order in which windows are applied.
    let drive: Vec<f64> = currents
        .transpose()
        .iter()
        .map(|i| diode_voltage(*i, &p.diode))
        .collect();
    let v0 = junction_voltage(currents[(0, 0)], &p.diode);
    let trace = integrate_rc(&drive, v0, p)?;
    Ok(DMatrix::from_row_slice(u.len(), w.n_windows(), &trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics_sim::{simulate_diode, DEFAULT_CURRENT_RANGE};

    #[test]
    fn small_signal_limit_is_first_order_rc() {
        // At 0.1 V the diode passes ~1e-11 A, so V follows the plain RC law.
        let p = RcCircuitParams {
            steps_per_window: 1,
            ..Default::default()
        };
        let source = 0.1;
        let rc = p.time_constant();
        let n = (5.0 * rc / p.timestep).round() as usize;
        let trace = integrate_rc(&vec![source; n], 0.0, &p).unwrap();
        for (k, v) in trace.iter().enumerate() {
            let t = (k + 1) as f64 * p.timestep;
            let exact = source * (1.0 - (-t / rc).exp());
            assert!((v - exact).abs() < 1e-8, "step {k}: {v} vs {exact}");
        }
        let last = *trace.last().unwrap();
        assert!((source - last).abs() / source < 0.02);
    }

    #[test]
    fn converges_to_junction_voltage_within_five_rc() {
        let p = RcCircuitParams::default();
        for i in [1e-4, 1e-3, 5e-3] {
            let target = junction_voltage(i, &p.diode);
            let n = (5.0 * p.time_constant() / p.timestep).round() as usize;
            let trace = integrate_rc(&vec![diode_voltage(i, &p.diode); n], 0.0, &p).unwrap();
            let last = *trace.last().unwrap();
            assert!((target - last).abs() / target < 0.02, "i = {i}: {last} vs {target}");
            // Steady state balances resistor and diode currents.
            let through_r = (diode_voltage(i, &p.diode) - target) / p.diode.series_resistance;
            assert!((through_r - i).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_coarse_timestep() {
        let p = RcCircuitParams {
            timestep: 3e-3,
            ..Default::default()
        };
        assert!(matches!(
            integrate_rc(&[1.0], 0.0, &p),
            Err(SimError::UnstableTimestep { .. })
        ));
        // Fine for RC, too coarse for the diode at 10 mA.
        let p = RcCircuitParams {
            timestep: 1e-3,
            ..Default::default()
        };
        let w = MultiplexWindows {
            bounds: vec![(0.0, 0.01)],
            seed: 0,
        };
        assert!(matches!(
            simulate_rc_circuit(&[0.0, 1.0], &w, &p),
            Err(SimError::UnstableTimestep { .. })
        ));
    }

    #[test]
    fn output_depends_on_position_on_wave() {
        let u: Vec<f64> = (0..200)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 20.0).sin())
            .collect();
        let w = MultiplexWindows::random(3, 4, DEFAULT_CURRENT_RANGE).unwrap();
        let diode = simulate_diode(&u, &w, &DiodeCircuitParams::default()).unwrap();
        let rc = simulate_rc_circuit(&u, &w, &RcCircuitParams::default()).unwrap();
        // u(22) == u(28) on the rising and falling flanks of the wave.
        assert!((u[22] - u[28]).abs() < 1e-12);
        assert!((diode.row(22) - diode.row(28)).amax() < 1e-12);
        assert!((rc.row(22) - rc.row(28)).amax() > 1e-3);
    }

    #[test]
    fn windows_applied_in_sequence() {
        let u = [0.0, 1.0, 0.25];
        let w = MultiplexWindows::random(3, 5, DEFAULT_CURRENT_RANGE).unwrap();
        let p = RcCircuitParams::default();
        let m = simulate_rc_circuit(&u, &w, &p).unwrap();
        let currents = map_input_to_currents(&u, &w).unwrap();
        let mut v = junction_voltage(currents[(0, 0)], &p.diode);
        for t in 0..3 {
            for j in 0..3 {
                let source = diode_voltage(currents[(t, j)], &p.diode);
                v = integrate_rc(&[source], v, &p).unwrap()[0];
                assert_eq!(m[(t, j)], v);
            }
        }
    }

    #[test]
    fn single_window_constant_input_is_steady() {
        let u = vec![0.3; 50];
        let w = MultiplexWindows::random(1, 0, DEFAULT_CURRENT_RANGE).unwrap();
        let p = RcCircuitParams::default();
        let rc = simulate_rc_circuit(&u, &w, &p).unwrap();
        let target = junction_voltage(w.bounds[0].0, &p.diode);
        assert!(rc.iter().all(|v| (v - target).abs() < 1e-9));
    }
}
