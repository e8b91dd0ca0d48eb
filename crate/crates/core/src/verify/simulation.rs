use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{confidence_bound, VarianceConvention, VerifyError};
use crate::abstraction::FiniteTS;
use crate::geometry::hausdorff_distance;
use crate::seeds;

/// Which left-hand states must be related for the certificate to hold.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    AllStates,
    /// Only the listed left-hand states.
    Initial(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationOptions {
    pub scope: Scope,
    /// Samples per side for each observation distance.
    pub samples: usize,
    pub seed: u64,
    /// `(epsilon, sigma_e, C)` for the probability bound, when wanted.
    pub bound: Option<(f64, f64, f64)>,
    pub variance_convention: VarianceConvention,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        SimulationOptions {
            scope: Scope::AllStates,
            samples: 100,
            seed: 0,
            bound: None,
            variance_convention: VarianceConvention::Verbatim,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaCertificate {
    pub sigma: f64,
    pub holds: bool,
    /// Greatest σ-simulation relation between the two systems.
    pub witness_relation: Vec<(usize, usize)>,
    pub delta_bound: Option<f64>,
    /// SHA-256 over the JSON encodings of both systems.
    pub inputs_digest: String,
}

/// Observation distances between the states of two systems, computed for
/// pairs up to a cutoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub cutoff: f64,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    /// Raises the cutoff, computing the entries it newly admits.
    pub fn extend(
        &mut self,
        t1: &FiniteTS,
        t2: &FiniteTS,
        cutoff: f64,
        samples: usize,
        seed: u64,
    ) -> Result<(), VerifyError> {
        if t1.dim() != t2.dim() {
            return Err(VerifyError::Precondition("systems differ in dimension".into()));
        }
        if self.values.len() != t1.len() || self.values.iter().any(|r| r.len() != t2.len()) {
            return Err(VerifyError::Precondition("distance matrix does not fit the systems".into()));
        }
        if cutoff <= self.cutoff {
            return Ok(());
        }
        let boxes = |t: &FiniteTS| -> Result<Vec<_>, VerifyError> {
            t.states()
                .par_iter()
                .map(|s| Ok(s.region.without_empty_pieces()?.bounding_box()?))
                .collect()
        };
        let (b1, b2) = (boxes(t1)?, boxes(t2)?);
        let old = self.cutoff;
        self.values.par_iter_mut().enumerate().try_for_each(|(i, row)| {
            for (j, value) in row.iter_mut().enumerate() {
                *value = match (&b1[i], &b2[j]) {
                    (None, None) => 0.0,
                    (None, _) | (_, None) => f64::INFINITY,
                    (Some(a), Some(b)) => {
                        let lb = a.hausdorff_lower_bound(b);
                        if lb > cutoff || lb <= old {
                            continue;
                        }
                        let r1 = &t1.state(i).region;
                        let r2 = &t2.state(j).region;
                        if r1 == r2 {
                            0.0
                        } else {
                            let s = seeds::derive(seed, &[i as u64, j as u64]);
                            hausdorff_distance(r1, r2, samples, s)?.max(lb)
                        }
                    }
                };
            }
            Ok::<(), VerifyError>(())
        })?;
        self.cutoff = cutoff;
        Ok(())
    }
}

/// Hausdorff distance between every pair of state footprints, estimated as
/// the larger of the sampled value and the bounding-box lower bound. Each
/// pair uses its own derived seed, so entries do not depend on the cutoff.
/// Empty footprints (sinks) are at distance 0 from each other and infinitely
/// far from anything else. Pairs whose boxes alone prove a distance above
/// the cutoff are left infinite.
pub fn observation_distances(
    t1: &FiniteTS,
    t2: &FiniteTS,
    cutoff: f64,
    samples: usize,
    seed: u64,
) -> Result<DistanceMatrix, VerifyError> {
    let mut m = DistanceMatrix {
        cutoff: f64::NEG_INFINITY,
        values: vec![vec![f64::INFINITY; t2.len()]; t1.len()],
    };
    m.extend(t1, t2, cutoff, samples, seed)?;
    Ok(m)
}

fn digest(t1: &FiniteTS, t2: &FiniteTS) -> String {
    let mut h = Sha256::new();
    for t in [t1, t2] {
        h.update(serde_json::to_vec(t).expect("transition systems serialize"));
        h.update([0u8]);
    }
    hex::encode(h.finalize())
}

/// Greatest fixpoint over precomputed distances: start from all pairs within
/// `sigma` and delete pairs whose left successors are not all matched by
/// related right successors.
pub fn check_with_distances(
    t1: &FiniteTS,
    t2: &FiniteTS,
    dist: &DistanceMatrix,
    sigma: f64,
    opts: &SimulationOptions,
) -> Result<SigmaCertificate, VerifyError> {
    if sigma > dist.cutoff {
        return Err(VerifyError::Precondition(format!(
            "sigma {sigma} exceeds the distance cutoff {}",
            dist.cutoff
        )));
    }
    let (n1, n2) = (t1.len(), t2.len());
    let mut rel: Vec<Vec<bool>> = (0..n1)
        .map(|i| (0..n2).map(|j| dist.values[i][j] <= sigma).collect())
        .collect();
    loop {
        let mut changed = false;
        for i in 0..n1 {
            for j in 0..n2 {
                if !rel[i][j] {
                    continue;
                }
                let ok = t1
                    .successors(i)
                    .iter()
                    .all(|&a| t2.successors(j).iter().any(|&b| rel[a][b]));
                if !ok {
                    rel[i][j] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let scope: Vec<usize> = match &opts.scope {
        Scope::AllStates => (0..n1).collect(),
        Scope::Initial(list) => list.clone(),
    };
    if scope.iter().any(|i| *i >= n1) {
        return Err(VerifyError::Precondition("scope state out of range".into()));
    }
    let holds = scope.iter().all(|i| rel[*i].iter().any(|r| *r));
    let witness_relation = (0..n1)
        .flat_map(|i| (0..n2).map(move |j| (i, j)))
        .filter(|(i, j)| rel[*i][*j])
        .collect();
    let delta_bound = match opts.bound {
        Some((eps, sigma_e, c)) => Some(confidence_bound(sigma, eps, sigma_e, c, opts.variance_convention)?),
        None => None,
    };
    Ok(SigmaCertificate {
        sigma,
        holds,
        witness_relation,
        delta_bound,
        inputs_digest: digest(t1, t2),
    })
}

/// Whether `t1` is σ-approximately simulated by `t2`.
pub fn check_sigma_simulation(
    t1: &FiniteTS,
    t2: &FiniteTS,
    sigma: f64,
    opts: &SimulationOptions,
) -> Result<SigmaCertificate, VerifyError> {
    if !(sigma >= 0.0) {
        return Err(VerifyError::Precondition(format!("sigma {sigma} must be non-negative")));
    }
    let dist = observation_distances(t1, t2, sigma, opts.samples, opts.seed)?;
    check_with_distances(t1, t2, &dist, sigma, opts)
}
