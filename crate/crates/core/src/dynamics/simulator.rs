use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Dataset, DynamicsError, PwaModel, Sample};
use crate::geometry::Polytope;

/// A resettable system that can be queried at arbitrary states.
pub trait BlackBox {
    fn domain(&self) -> &Polytope;
    fn query(&mut self, x: &[f64]) -> Result<Vec<f64>, DynamicsError>;
}

/// Black box backed by a known model and its own noise stream.
#[derive(Clone, Debug)]
pub struct ModelSimulator {
    model: PwaModel,
    rng: ChaCha8Rng,
}

impl ModelSimulator {
    pub fn new(model: PwaModel, seed: u64) -> Self {
        ModelSimulator {
            model,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelSimulator::new(self.model.clone(), seed)
    }

    /// The underlying model, for white-box benchmarking only.
    pub fn model(&self) -> &PwaModel {
        &self.model
    }
}

impl BlackBox for ModelSimulator {
    fn domain(&self) -> &Polytope {
        self.model.domain()
    }

    fn query(&mut self, x: &[f64]) -> Result<Vec<f64>, DynamicsError> {
        self.model.step(x, &mut self.rng)
    }
}

/// Queries the black box once per state, in order.
pub fn generate_dataset<B: BlackBox + ?Sized>(bb: &mut B, xs: &[Vec<f64>]) -> Result<Dataset, DynamicsError> {
    let pairs = xs
        .iter()
        .map(|x| {
            if !bb.domain().contains_closed(x, 1e-9) {
                return Err(DynamicsError::OutsideDomain(x.clone()));
            }
            Ok(Sample {
                x: x.clone(),
                y: bb.query(x)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset::new(pairs))
}
