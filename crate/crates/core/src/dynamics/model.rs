use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::geometry::{checked_inverse, sample_uniform, Polytope, Region};

/// Slack used when testing closure membership for mode dispatch.
const CLOSURE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PwaMode {
    #[serde(rename = "A", with = "crate::serde_la::matrix")]
    pub a: DMatrix<f64>,
    #[serde(with = "crate::serde_la::vector")]
    pub b: DVector<f64>,
    pub region: Polytope,
}

impl PwaMode {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(x);
        (&self.a * x + &self.b).as_slice().to_vec()
    }
}

/// `x+ = A_i x + b_i + e` on the mode region containing `x`, with
/// `e ~ N(0, noise_sigma² I)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct PwaModel {
    modes: Vec<PwaMode>,
    domain: Polytope,
    noise_sigma: f64,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    modes: Vec<PwaMode>,
    domain: Polytope,
    noise_sigma: f64,
}

impl TryFrom<RawModel> for PwaModel {
    type Error = DynamicsError;

    fn try_from(raw: RawModel) -> Result<Self, Self::Error> {
        PwaModel::new(raw.modes, raw.domain, raw.noise_sigma)
    }
}

impl From<PwaModel> for RawModel {
    fn from(m: PwaModel) -> Self {
        RawModel {
            modes: m.modes,
            domain: m.domain,
            noise_sigma: m.noise_sigma,
        }
    }
}

impl PwaModel {
    pub fn new(modes: Vec<PwaMode>, domain: Polytope, noise_sigma: f64) -> Result<Self, DynamicsError> {
        let n = domain.dim();
        if modes.is_empty() {
            return Err(DynamicsError::InvalidModel("no modes".into()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(DynamicsError::InvalidModel(format!("noise sigma {noise_sigma}")));
        }
        for (i, m) in modes.iter().enumerate() {
            if m.a.nrows() != n || m.a.ncols() != n || m.b.len() != n || m.region.dim() != n {
                return Err(DynamicsError::InvalidModel(format!("mode {i} has wrong dimensions")));
            }
            checked_inverse(&m.a)?;
            if m.region.is_empty()? {
                return Err(DynamicsError::InvalidModel(format!("mode {i} has an empty region")));
            }
        }
        Ok(PwaModel {
            modes,
            domain,
            noise_sigma,
        })
    }

    /// The two-mode planar system used throughout the examples: mode 1 is
    /// `diag(1, 0.98)` on `x1 < 0.3`, mode 2 a coupled contraction with a
    /// small drift on `x1 > 0.3`, domain `[0,1]²`.
    pub fn case_study(noise_sigma: f64) -> Self {
        let domain = Polytope::boxed(&[0.0, 0.0], &[1.0, 1.0]).expect("static box");
        let left = domain.with_halfspace(&[1.0, 0.0], 0.3).expect("static");
        let right = domain.with_halfspace(&[-1.0, 0.0], -0.3).expect("static");
        let modes = vec![
            PwaMode {
                a: DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.98]),
                b: DVector::zeros(2),
                region: left,
            },
            PwaMode {
                a: DMatrix::from_row_slice(2, 2, &[0.83, 0.12, 0.12, 0.81]),
                b: DVector::from_vec(vec![0.01, 0.03]),
                region: right,
            },
        ];
        PwaModel::new(modes, domain, noise_sigma).expect("static model")
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[PwaMode] {
        &self.modes
    }

    pub fn domain(&self) -> &Polytope {
        &self.domain
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn with_noise(&self, noise_sigma: f64) -> Result<Self, DynamicsError> {
        PwaModel::new(self.modes.clone(), self.domain.clone(), noise_sigma)
    }

    pub fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.domain.contains_closed(x, CLOSURE_TOL)
    }

    /// Index of the lowest mode whose closed region contains `x`. Points of
    /// the domain that no closure catches (round-off between estimated
    /// regions) go to the mode with the largest margin.
    pub fn mode_of(&self, x: &[f64]) -> Result<usize, DynamicsError> {
        if !self.in_domain(x) {
            return Err(DynamicsError::OutsideDomain(x.to_vec()));
        }
        if let Some(i) = self
            .modes
            .iter()
            .position(|m| m.region.contains_closed(x, CLOSURE_TOL))
        {
            return Ok(i);
        }
        let best = self
            .modes
            .iter()
            .enumerate()
            .map(|(i, m)| (i, m.region.margin(x)))
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        Ok(best.0)
    }

    pub fn step_noiseless(&self, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        Ok(self.modes[self.mode_of(x)?].apply(x))
    }

    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R) -> Result<Vec<f64>, DynamicsError> {
        let mut y = self.step_noiseless(x)?;
        if self.noise_sigma > 0.0 {
            let normal = Normal::new(0.0, self.noise_sigma).expect("validated sigma");
            for v in &mut y {
                *v += normal.sample(rng);
            }
        }
        Ok(y)
    }

    /// Sampled partition check: every point lies in at least one mode
    /// closure and in at most one mode interior. Returns the offending
    /// points.
    pub fn partition_violations(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, DynamicsError> {
        let pts = sample_uniform(&Region::from_polytope(self.domain.clone()), n, seed)?;
        Ok(pts
            .into_iter()
            .filter(|x| {
                let closed = self.modes.iter().filter(|m| m.region.contains_closed(x, CLOSURE_TOL)).count();
                let open = self.modes.iter().filter(|m| m.region.contains(x)).count();
                closed == 0 || open > 1
            })
            .collect())
    }
}
