use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::SampleError;

/// Largest jitter tried before giving up on a Cholesky factorization, as a
/// fraction of the signal variance.
const MAX_JITTER_FRACTION: f64 = 1e-2;

/// Squared-exponential kernel `s² exp(-|x - x'|² / (2 ℓ²))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub lengthscale: f64,
    pub signal_var: f64,
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.signal_var * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }

    pub fn gram(&self, xs: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(xs.len(), xs.len(), |i, j| self.eval(&xs[i], &xs[j]))
    }
}

/// Zero-mean GP regression over scalar targets, fitted on construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawGp", into = "RawGp")]
pub struct GpModel {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    kernel: Kernel,
    /// Observation noise variance added to the Gram diagonal.
    noise_var: f64,
    /// Jitter actually used (after escalation).
    jitter: f64,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawGp {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    kernel: Kernel,
    noise_var: f64,
    jitter: f64,
}

impl TryFrom<RawGp> for GpModel {
    type Error = SampleError;

    fn try_from(raw: RawGp) -> Result<Self, Self::Error> {
        GpModel::fit(raw.inputs, raw.targets, raw.kernel, raw.noise_var, raw.jitter)
    }
}

impl From<GpModel> for RawGp {
    fn from(g: GpModel) -> Self {
        RawGp {
            inputs: g.inputs,
            targets: g.targets,
            kernel: g.kernel,
            noise_var: g.noise_var,
            jitter: g.jitter,
        }
    }
}

impl GpModel {
    /// Factorizes `K + (noise_var + jitter) I`, multiplying the jitter by 10
    /// until the factorization succeeds or the jitter cap is passed.
    pub fn fit(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        kernel: Kernel,
        noise_var: f64,
        jitter: f64,
    ) -> Result<Self, SampleError> {
        if inputs.len() != targets.len() {
            return Err(SampleError::InvalidConfig("inputs and targets differ in length".into()));
        }
        if !(kernel.lengthscale > 0.0 && kernel.signal_var > 0.0 && noise_var >= 0.0 && jitter >= 0.0) {
            return Err(SampleError::InvalidConfig("kernel parameters must be positive".into()));
        }
        if inputs.is_empty() {
            return Ok(GpModel {
                inputs,
                targets,
                kernel,
                noise_var,
                jitter,
                chol: None,
                alpha: DVector::zeros(0),
            });
        }
        let gram = kernel.gram(&inputs);
        let n = inputs.len();
        let y = DVector::from_column_slice(&targets);
        let mut j = jitter;
        loop {
            let m = &gram + DMatrix::identity(n, n) * (noise_var + j);
            if let Some(chol) = Cholesky::new(m) {
                let alpha = chol.solve(&y);
                return Ok(GpModel {
                    inputs,
                    targets,
                    kernel,
                    noise_var,
                    jitter: j,
                    chol: Some(chol),
                    alpha,
                });
            }
            j = if j == 0.0 { 1e-12 * kernel.signal_var } else { j * 10.0 };
            if j > MAX_JITTER_FRACTION * kernel.signal_var {
                return Err(SampleError::Cholesky { jitter: j });
            }
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Copy with one more observation.
    pub fn with_observation(&self, x: Vec<f64>, target: f64) -> Result<Self, SampleError> {
        let mut inputs = self.inputs.clone();
        let mut targets = self.targets.clone();
        inputs.push(x);
        targets.push(target);
        GpModel::fit(inputs, targets, self.kernel, self.noise_var, self.jitter)
    }

    /// Posterior `(mean, variance)` at `x`; the variance is clamped at 0.
    pub fn posterior(&self, x: &[f64]) -> (f64, f64) {
        let Some(chol) = &self.chol else {
            return (0.0, self.kernel.signal_var);
        };
        let k = DVector::from_iterator(self.inputs.len(), self.inputs.iter().map(|xi| self.kernel.eval(xi, x)));
        let mean = k.dot(&self.alpha);
        let v = chol.l().solve_lower_triangular(&k).expect("triangular factor is nonsingular");
        let var = (self.kernel.signal_var - v.dot(&v)).max(0.0);
        (mean, var)
    }

    /// `½ log det(I + s⁻² K)`, the information-gain proxy.
    pub fn log_det_gain(&self) -> f64 {
        if self.inputs.is_empty() {
            return 0.0;
        }
        let n = self.inputs.len();
        let m = DMatrix::identity(n, n) + self.kernel.gram(&self.inputs) / self.kernel.signal_var;
        match Cholesky::new(m) {
            Some(c) => c.l().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            None => f64::INFINITY,
        }
    }
}

/// Posterior mean and variance of `g` at `x`.
pub fn gp_posterior(g: &GpModel, x: &[f64]) -> (f64, f64) {
    g.posterior(x)
}
