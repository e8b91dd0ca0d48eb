//! Mode-count, dynamics and partition recovery from sampled transitions:
//! randomized peeling initialization followed by neighborhood-vote
//! refinement guided by the current abstraction.

mod affine;
mod boundary;
mod init;
mod refine;

pub use affine::{estimate_noise_sigma, fit_affine, residual_norm};
pub use boundary::{fit_boundaries, SvmConfig};
pub use init::init_identify;
pub use refine::{prune_unfeasible, reassign_undecidable, refine_identify, Reassignment, SuccessorMap};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{DynamicsError, PwaModel};
use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum IdentifyError {
    #[error("degenerate cluster: {0}")]
    DegenerateCluster(String),
    #[error("no candidate reached {needed} inliers at sigma_hat = {sigma_hat}; raise sigma_hat")]
    ThresholdTooTight { sigma_hat: f64, needed: usize },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("boundary fitting needs at least two clusters")]
    SingleCluster,
    #[error("identification collapsed: {0}")]
    Collapse(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentConfig {
    /// Inlier threshold on the residual norm; estimated from the data as
    /// three robust noise deviations when absent.
    pub sigma_hat: Option<f64>,
    /// Initialization stops once fewer than `r·K` samples remain unexplained.
    pub r: f64,
    /// Candidate models drawn per initialization round.
    pub candidates: usize,
    /// Merge threshold on `‖A_i − A_j‖_F`.
    pub beta: f64,
    /// Discard threshold on the cluster fraction.
    pub mu: f64,
    /// Convergence threshold on `‖A_i − A_i_old‖_F`.
    pub kappa: f64,
    /// Per-iteration decay of `beta` and `mu`.
    pub theta: f64,
    /// Neighborhood radius in joint `(x, y)` space; 10% of the domain
    /// diameter when absent.
    pub ball_radius: Option<f64>,
    pub max_iterations: usize,
    pub svm: SvmConfig,
    pub seed: u64,
}

impl Default for IdentConfig {
    fn default() -> Self {
        IdentConfig {
            sigma_hat: None,
            r: 0.05,
            candidates: 500,
            beta: 0.1,
            mu: 0.05,
            kappa: 1e-4,
            theta: 0.9,
            ball_radius: None,
            max_iterations: 50,
            svm: SvmConfig::default(),
            seed: 0,
        }
    }
}

impl IdentConfig {
    pub fn validate(&self) -> Result<(), IdentifyError> {
        let bad = |m: &str| Err(IdentifyError::InvalidConfig(m.into()));
        if let Some(s) = self.sigma_hat {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma_hat must be positive");
            }
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return bad("r must lie in (0, 1)");
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad("theta must lie in (0, 1)");
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return bad("mu must lie in (0, 1)");
        }
        if !(self.beta > 0.0 && self.kappa > 0.0) {
            return bad("beta and kappa must be positive");
        }
        if let Some(rho) = self.ball_radius {
            if !(rho > 0.0) {
                return bad("ball_radius must be positive");
            }
        }
        if self.candidates == 0 || self.max_iterations == 0 {
            return bad("candidates and max_iterations must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentResult {
    pub model: PwaModel,
    /// Sample indices attributed to each mode; disjoint, covering every
    /// retained sample.
    pub clusters: Vec<Vec<usize>>,
    /// Mean residual norm of retained samples under their attributed mode.
    pub residual: f64,
    pub sigma_hat: f64,
    /// Samples dropped as inconsistent with the abstraction.
    pub discarded: Vec<usize>,
    pub iterations: usize,
}

impl IdentResult {
    /// Per-sample cluster label (`None` for samples outside every cluster).
    pub fn labels(&self, len: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; len];
        for (i, c) in self.clusters.iter().enumerate() {
            for &k in c {
                out[k] = Some(i);
            }
        }
        out
    }
}

/// Affine law `(A, b)` of one mode.
pub type AffineLaw = (DMatrix<f64>, DVector<f64>);

/// Builds the identified model from laws and clusters: fits the partition,
/// drops modes whose region comes out empty or whose `A` is singular, and
/// reports the mean residual.
#[allow(clippy::too_many_arguments)]
pub(crate) fn assemble(
    data: &crate::dynamics::Dataset,
    mut laws: Vec<AffineLaw>,
    mut clusters: Vec<Vec<usize>>,
    discarded: Vec<usize>,
    domain: &crate::geometry::Polytope,
    cfg: &IdentConfig,
    sigma_hat: f64,
    iterations: usize,
) -> Result<IdentResult, IdentifyError> {
    use crate::dynamics::PwaMode;
    use crate::geometry::checked_inverse;

    loop {
        if laws.is_empty() {
            return Err(IdentifyError::Collapse("no modes left".into()));
        }
        let regions = if laws.len() >= 2 {
            fit_boundaries(data, &clusters, domain, &cfg.svm)?
        } else {
            vec![domain.clone()]
        };
        let mut keep = Vec::with_capacity(laws.len());
        for (law, region) in laws.iter().zip(&regions) {
            keep.push(checked_inverse(&law.0).is_ok() && !region.is_empty()?);
        }
        if keep.iter().all(|k| *k) {
            let n = domain.dim();
            let mut sum = 0.0;
            let mut sq = 0.0;
            let mut count = 0usize;
            for (law, c) in laws.iter().zip(&clusters) {
                for &k in c {
                    let r = residual_norm(law, &data.pairs[k].x, &data.pairs[k].y);
                    sum += r;
                    sq += r * r;
                    count += 1;
                }
            }
            let noise = if count > 0 { (sq / (count * n) as f64).sqrt() } else { 0.0 };
            let modes = laws
                .into_iter()
                .zip(regions)
                .map(|((a, b), region)| PwaMode { a, b, region })
                .collect();
            let model = PwaModel::new(modes, domain.clone(), noise)?;
            return Ok(IdentResult {
                model,
                clusters,
                residual: if count > 0 { sum / count as f64 } else { 0.0 },
                sigma_hat,
                discarded,
                iterations,
            });
        }
        // drop the smallest offending mode and hand its samples to the
        // best-fitting survivor, then refit the partition
        let worst = (0..laws.len())
            .filter(|&i| !keep[i])
            .min_by_key(|&i| clusters[i].len())
            .expect("some mode failed");
        log::warn!("dropping mode {worst}: empty region or singular dynamics");
        laws.remove(worst);
        let orphans = clusters.remove(worst);
        if laws.is_empty() {
            continue;
        }
        for k in orphans {
            let s = &data.pairs[k];
            let best = (0..laws.len())
                .map(|i| (i, residual_norm(&laws[i], &s.x, &s.y)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc })
                .0;
            clusters[best].push(k);
        }
        for c in &mut clusters {
            c.sort_unstable();
        }
    }
}

impl IdentResult {
    /// Fits one affine law per cluster and the partition between them.
    pub fn from_clusters(
        data: &crate::dynamics::Dataset,
        clusters: Vec<Vec<usize>>,
        domain: &crate::geometry::Polytope,
        cfg: &IdentConfig,
        sigma_hat: f64,
    ) -> Result<Self, IdentifyError> {
        let laws = clusters
            .iter()
            .map(|c| fit_affine(data, c))
            .collect::<Result<Vec<_>, _>>()?;
        assemble(data, laws, clusters, Vec::new(), domain, cfg, sigma_hat, 0)
    }
}
