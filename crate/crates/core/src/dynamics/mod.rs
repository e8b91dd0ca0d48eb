//! Piecewise-affine models, datasets and the black-box simulator interface.

mod dataset;
mod model;
mod simulator;

pub use dataset::{Dataset, Sample};
pub use model::{PwaMode, PwaModel};
pub use simulator::{generate_dataset, BlackBox, ModelSimulator};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("state {0:?} lies outside the domain")]
    OutsideDomain(Vec<f64>),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("malformed dataset: {0}")]
    MalformedDataset(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
