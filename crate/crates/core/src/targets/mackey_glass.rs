//! Mackey-Glass delay differential equation.
//!
//! `dx/dt = beta * x(t - tau) / (1 + x(t - tau)^n) - gamma * x(t)`
//!
//! Integrated with classic fixed-step RK4. The delayed state at half steps
//! is obtained by cubic Hermite interpolation between stored grid points, so
//! the scheme keeps fourth-order accuracy. The history before `t = 0` is the
//! constant `x0`.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{SignalSeries, TargetError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MackeyGlassParams {
    pub beta: f64,
    pub gamma: f64,
    pub n_exp: f64,
    pub tau_delay: f64,
    pub dt: f64,
    /// Keep one sample every `subsample` integration steps.
    pub subsample: usize,
    /// Kept samples discarded before output starts.
    pub washout: usize,
    pub x0: f64,
    pub length: usize,
}

impl Default for MackeyGlassParams {
    fn default() -> Self {
        Self {
            beta: 0.2,
            gamma: 0.1,
            n_exp: 10.0,
            tau_delay: 17.0,
            dt: 0.1,
            subsample: 10,
            washout: 1000,
            x0: 1.2,
            length: 2000,
        }
    }
}

impl MackeyGlassParams {
    /// Number of integration steps spanned by the delay.
    fn delay_steps(&self) -> Result<usize, TargetError> {
        let bad = |reason: &str| TargetError::InvalidMackeyGlass(reason.to_string());
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(bad("dt must be positive"));
        }
        if self.subsample == 0 {
            return Err(bad("subsample must be at least 1"));
        }
        if self.length == 0 {
            return Err(bad("length must be at least 1"));
        }
        let ratio = self.tau_delay / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(bad("tau_delay / dt must be a positive integer"));
        }
        Ok(steps as usize)
    }
}

/// Grid point of the delayed trajectory with its one-sided slopes. They
/// differ only at `t = 0`, where the flat history meets the solution.
#[derive(Clone, Copy)]
struct Node {
    x: f64,
    slope_left: f64,
    slope_right: f64,
}

pub fn generate_mackey_glass(p: &MackeyGlassParams) -> Result<SignalSeries, TargetError> {
    let delay = p.delay_steps()?;
    let rhs = |x: f64, xd: f64| p.beta * xd / (1.0 + xd.powf(p.n_exp)) - p.gamma * x;
    let dt = p.dt;

    // history[i] is the grid point `delay - i` steps behind the current one,
    // so history[0] is the delayed point and the back is the current point.
    let flat = Node {
        x: p.x0,
        slope_left: 0.0,
        slope_right: 0.0,
    };
    let mut history: VecDeque<Node> = std::iter::repeat_n(flat, delay + 1).collect();

    let total = p.washout + p.length;
    let mut out = Vec::with_capacity(p.length);
    let mut x = p.x0;
    let mut step: usize = 0;
    loop {
        if step % p.subsample == 0 {
            let kept = step / p.subsample;
            if kept >= p.washout {
                out.push(x);
            }
            if kept + 1 >= total {
                break;
            }
        }
        let k1 = rhs(x, history[0].x);
        let current = history.back_mut().expect("history is never empty");
        current.slope_right = k1;
        if step > 0 {
            current.slope_left = k1;
        }

        let lag0 = history[0];
        let lag1 = history[1];
        let lag_mid =
            (lag0.x + lag1.x) / 2.0 + dt / 8.0 * (lag0.slope_right - lag1.slope_left);

        let k2 = rhs(x + dt / 2.0 * k1, lag_mid);
        let k3 = rhs(x + dt / 2.0 * k2, lag_mid);
        let k4 = rhs(x + dt * k3, lag1.x);
        x += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

        history.pop_front();
        history.push_back(Node {
            x,
            slope_left: 0.0,
            slope_right: 0.0,
        });
        step += 1;
    }
    SignalSeries::new("mackey_glass", out)
}
