//! Open H-polytopes, finite unions of them, and Monte-Carlo measures.

pub mod lp;
mod measure;
mod polytope;
mod region;

pub use measure::{hausdorff_distance, mc_volume, sample_uniform, VolumeEstimate};
pub use polytope::{checked_inverse, Polytope};
pub use region::Region;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Chebyshev radius at or below which an open polytope counts as empty.
pub const EMPTY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("matrix is singular (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },
    #[error("set is unbounded")]
    Unbounded,
    #[error("distance undefined for an empty operand")]
    UndefinedDistance,
    #[error("region too thin to sample: acceptance {accepted}/{drawn}")]
    ThinRegion { accepted: usize, drawn: usize },
    #[error("cannot sample from an empty region")]
    EmptyRegion,
    #[error("malformed input: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoundingBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        // LP round-off can invert a degenerate axis by a hair
        let upper = lower
            .iter()
            .zip(upper)
            .map(|(lo, up)| up.max(*lo))
            .collect();
        Ok(BoundingBox { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, up)| up - lo)
            .product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, up)| (up - lo) * (up - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            lower: self.lower.iter().zip(&other.lower).map(|(a, b)| a.min(*b)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(a, b)| a.max(*b)).collect(),
        }
    }

    /// Whether the boxes overlap with positive-width slack `tol`.
    pub fn overlaps(&self, other: &BoundingBox, tol: f64) -> bool {
        (0..self.dim()).all(|j| self.lower[j] < other.upper[j] + tol && other.lower[j] < self.upper[j] + tol)
    }

    /// Lower bound on the Hausdorff distance between sets with these boxes.
    pub fn hausdorff_lower_bound(&self, other: &BoundingBox) -> f64 {
        (0..self.dim())
            .map(|j| {
                (self.lower[j] - other.lower[j])
                    .abs()
                    .max((self.upper[j] - other.upper[j]).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn to_polytope(&self) -> Result<Polytope, GeometryError> {
        Polytope::boxed(&self.lower, &self.upper)
    }
}
