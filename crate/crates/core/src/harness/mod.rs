//! End-to-end pipeline (identify, abstract, actively sample, certify),
//! evaluation metrics and the case-study experiment tables.

mod metrics;
mod pipeline;
mod tables;

pub use metrics::{compute_metrics, identification_errors, match_modes, sigma_search, SigmaSearch, TrialMetrics};
pub use pipeline::{benchmark_abstraction, run_pipeline, PipelineOutcome, RoundSummary};
pub use tables::{run_tables, ExperimentReport, TableRow, TablesConfig, TrialOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abstraction::AbstractionError;
use crate::dynamics::DynamicsError;
use crate::geometry::{GeometryError, Polytope};
use crate::identify::{IdentConfig, IdentifyError};
use crate::logic::{Atom, LogicError};
use crate::sample::{SampleError, SamplerConfig};
use crate::verify::VerifyError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("identification collapsed in round {round} with {samples} samples: {message}")]
    Collapse {
        round: usize,
        samples: usize,
        message: String,
    },
    #[error("identify stage: {0}")]
    Identify(#[from] IdentifyError),
    #[error("abstraction stage: {0}")]
    Abstraction(#[from] AbstractionError),
    #[error("sampling stage: {0}")]
    Sample(#[from] SampleError),
    #[error("verification stage: {0}")]
    Verify(#[from] VerifyError),
    #[error("specification: {0}")]
    Logic(#[from] LogicError),
    #[error("black box: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl HarnessError {
    /// Short name of the stage that failed.
    pub fn stage(&self) -> &'static str {
        match self {
            HarnessError::Config(_) => "config",
            HarnessError::Collapse { .. } | HarnessError::Identify(_) => "identify",
            HarnessError::Abstraction(_) => "abstract",
            HarnessError::Sample(_) => "sample",
            HarnessError::Verify(_) => "check",
            HarnessError::Logic(_) => "specification",
            HarnessError::Dynamics(_) => "black-box",
            HarnessError::Geometry(_) => "geometry",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub ident: IdentConfig,
    pub sampler: SamplerConfig,
    /// Initial partition: boxes per axis.
    pub grid: Vec<usize>,
    pub eta: f64,
    /// Refinement passes for the learned abstraction.
    pub refinement_cap: usize,
    /// Refinement passes for the white-box benchmark.
    pub benchmark_passes: usize,
    pub trials: usize,
    pub seed: u64,
    pub initial_sample_count: usize,
    pub active_sample_budget: usize,
    /// Active picks between two re-identifications.
    pub batch_size: usize,
    pub formula: String,
    pub atoms: Vec<Atom>,
    /// Sliver floor for refinement splits, as a fraction of the domain volume.
    pub sliver_floor: f64,
    pub volume_samples: usize,
    /// Points per side for each observation distance in the σ check.
    pub hausdorff_samples: usize,
    /// Grid step for the σ search.
    pub sigma_step: f64,
    /// `ε` and `C` for the certificate's probability bound.
    pub bound_epsilon: f64,
    pub bound_c: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            ident: IdentConfig::default(),
            sampler: SamplerConfig::default(),
            grid: vec![10, 10],
            eta: 0.01,
            refinement_cap: 20,
            benchmark_passes: 20,
            trials: 5,
            seed: 0,
            initial_sample_count: 200,
            active_sample_budget: 20,
            batch_size: 10,
            formula: "G(p1 & F p2)".into(),
            atoms: Atom::case_study(),
            sliver_floor: 1e-6,
            volume_samples: 4000,
            hausdorff_samples: 100,
            sigma_step: 0.005,
            bound_epsilon: 0.0,
            bound_c: 0.0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.trials == 0 || self.initial_sample_count == 0 || self.batch_size == 0 {
            return bad("trials, initial_sample_count and batch_size must be at least 1");
        }
        if self.grid.is_empty() || self.grid.contains(&0) {
            return bad("grid needs at least one box per axis");
        }
        if self.hausdorff_samples == 0 || !(self.sigma_step > 0.0) {
            return bad("sigma search settings must be positive");
        }
        if !(self.bound_epsilon >= 0.0 && self.bound_c >= 0.0) {
            return bad("bound parameters must be non-negative");
        }
        self.ident.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.sampler.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.refine_config(0).validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub(crate) fn refine_config(&self, seed: u64) -> crate::abstraction::RefineConfig {
        crate::abstraction::RefineConfig {
            eta: self.eta,
            max_passes: self.refinement_cap,
            sliver_floor: self.sliver_floor,
            volume_samples: self.volume_samples,
            seed,
        }
    }
}

/// Radical inverse of `index` in `base`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let b = base as f64;
    let mut f = 1.0 / b;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f /= b;
    }
    out
}

/// First `n` points of the Halton sequence (bases 2, 3, 5, ...) scaled to
/// the domain's bounding box, keeping those inside the domain. Index 0 is
/// skipped.
pub fn halton_points(domain: &Polytope, n: usize) -> Result<Vec<Vec<f64>>, HarnessError> {
    const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];
    let dim = domain.dim();
    if dim > PRIMES.len() {
        return Err(HarnessError::Config(format!("Halton points supported up to {} dimensions", PRIMES.len())));
    }
    let bb = domain.bounding_box()?.ok_or(GeometryError::EmptyRegion)?;
    let mut out = Vec::with_capacity(n);
    let mut index = 1u64;
    while out.len() < n {
        let x: Vec<f64> = (0..dim)
            .map(|j| bb.lower[j] + radical_inverse(index, PRIMES[j]) * (bb.upper[j] - bb.lower[j]))
            .collect();
        if domain.contains(&x) {
            out.push(x);
        }
        index += 1;
        if index > 1000 * (n as u64 + 10) {
            return Err(GeometryError::ThinRegion {
                accepted: out.len(),
                drawn: index as usize,
            }
            .into());
        }
    }
    Ok(out)
}
