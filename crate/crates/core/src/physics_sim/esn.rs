use nalgebra::{DMatrix, DVector, Schur};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SimError;

/// Leaky echo state network with tanh nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct EsnParams {
    pub n_nodes: usize,
    pub spectral_radius: f64,
    /// Input weights are drawn uniformly from `[-input_scale, input_scale]`.
    pub input_scale: f64,
    /// In `(0, 1]`; 1 gives the non-leaky update.
    pub leak_rate: f64,
    pub seed: u64,
}

impl Default for EsnParams {
    fn default() -> Self {
        Self {
            n_nodes: 50,
            spectral_radius: 0.9,
            input_scale: 1.0,
            leak_rate: 1.0,
            seed: 42,
        }
    }
}

impl EsnParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if self.n_nodes == 0 {
            return bad("n_nodes must be at least 1");
        }
        if !(self.spectral_radius >= 0.0 && self.spectral_radius.is_finite()) {
            return bad("spectral_radius must be non-negative");
        }
        if !self.input_scale.is_finite() {
            return bad("input_scale must be finite");
        }
        if !(self.leak_rate > 0.0 && self.leak_rate <= 1.0) {
            return bad("leak_rate must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Largest eigenvalue modulus, from the real Schur form.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64, SimError> {
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000).ok_or_else(|| {
        SimError::SpectralRadiusFailure("Schur decomposition did not converge".into())
    })?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone)]
pub struct EchoStateNetwork {
    pub w: DMatrix<f64>,
    pub w_in: DVector<f64>,
    pub leak_rate: f64,
}

impl EchoStateNetwork {
    /// Draws `W` uniformly from `[-1, 1]` and rescales it to the requested
    /// spectral radius.
    pub fn new(p: &EsnParams) -> Result<Self, SimError> {
        p.validate()?;
        let n = p.n_nodes;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..=1.0));
        let w_in = DVector::from_fn(n, |_, _| p.input_scale * rng.random_range(-1.0..=1.0));
        let w = if p.spectral_radius == 0.0 {
            DMatrix::zeros(n, n)
        } else {
            let rho = spectral_radius(&raw)?;
            if rho <= f64::EPSILON {
                return Err(SimError::SpectralRadiusFailure(
                    "random recurrent matrix is nilpotent".into(),
                ));
            }
            raw * (p.spectral_radius / rho)
        };
        Ok(Self {
            w,
            w_in,
            leak_rate: p.leak_rate,
        })
    }

    /// One update from `state` under input `u`.
    pub fn step(&self, state: &DVector<f64>, u: f64) -> DVector<f64> {
        let drive = (&self.w * state + &self.w_in * u).map(f64::tanh);
        state * (1.0 - self.leak_rate) + drive * self.leak_rate
    }

    /// States for every input sample, starting from the zero state. Row `t`
    /// is the state after input `u[t]`.
    pub fn run(&self, u: &[f64]) -> Result<DMatrix<f64>, SimError> {
        if u.is_empty() {
            return Err(SimError::EmptyInput);
        }
        let n = self.w_in.len();
        let mut out = DMatrix::zeros(u.len(), n);
        let mut state = DVector::zeros(n);
        for (t, &ut) in u.iter().enumerate() {
            state = self.step(&state, ut);
            out.set_row(t, &state.transpose());
        }
        Ok(out)
    }
}
