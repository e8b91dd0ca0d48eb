//! Reachable sets, the reachability metric, σ-approximate simulation
//! certificates and the probability bound on certification.

mod bound;
mod simulation;

pub use bound::{confidence_bound, VarianceConvention};
pub use simulation::{
    check_sigma_simulation, check_with_distances, observation_distances, DistanceMatrix, Scope, SigmaCertificate,
    SimulationOptions,
};

use thiserror::Error;

use crate::abstraction::FiniteTS;
use crate::geometry::{hausdorff_distance, GeometryError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("reach set is empty")]
    EmptyReach,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Forward closure of `from` (which it contains), ascending.
pub fn reach_set(ts: &FiniteTS, from: &[usize]) -> Vec<usize> {
    let mut seen = vec![false; ts.len()];
    let mut stack: Vec<usize> = from.to_vec();
    while let Some(q) = stack.pop() {
        if q >= ts.len() || std::mem::replace(&mut seen[q], true) {
            continue;
        }
        stack.extend_from_slice(ts.successors(q));
    }
    (0..ts.len()).filter(|q| seen[*q]).collect()
}

/// Sampled Hausdorff distance between the footprints reachable from
/// `from1` in `t1` and from `from2` in `t2`.
pub fn reachability_metric_from(
    t1: &FiniteTS,
    from1: &[usize],
    t2: &FiniteTS,
    from2: &[usize],
    n: usize,
    seed: u64,
) -> Result<f64, VerifyError> {
    let r1 = t1.footprint(&reach_set(t1, from1));
    let r2 = t2.footprint(&reach_set(t2, from2));
    if r1.is_empty()? || r2.is_empty()? {
        return Err(VerifyError::EmptyReach);
    }
    Ok(hausdorff_distance(&r1, &r2, n, seed)?)
}

/// Reachability metric with every state initial.
pub fn reachability_metric(t1: &FiniteTS, t2: &FiniteTS, n: usize, seed: u64) -> Result<f64, VerifyError> {
    let all1: Vec<usize> = (0..t1.len()).collect();
    let all2: Vec<usize> = (0..t2.len()).collect();
    reachability_metric_from(t1, &all1, t2, &all2, n, seed)
}
