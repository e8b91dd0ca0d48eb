use rayon::prelude::*;

use super::affine::{fit_affine, residual_norm};
use super::init::inliers;
use super::{assemble, AffineLaw, IdentConfig, IdentResult, IdentifyError};
use crate::dynamics::{Dataset, PwaModel};

/// The abstraction as seen by the unfeasible-point test.
pub trait SuccessorMap {
    /// Abstract state whose footprint contains `x`.
    fn locate(&self, x: &[f64]) -> Option<usize>;
    /// Distance from `y` to the union of the footprints of the successors
    /// of `state`.
    fn successor_distance(&self, state: usize, y: &[f64]) -> f64;
}

/// Joint `(x, y)` neighbor lists within `radius`, self excluded.
fn neighborhoods(data: &Dataset, pool: &[usize], radius: f64) -> Vec<Vec<usize>> {
    let r2 = radius * radius;
    let mut out = vec![Vec::new(); data.len()];
    let lists: Vec<(usize, Vec<usize>)> = pool
        .par_iter()
        .map(|&k| {
            let pk = &data.pairs[k];
            let near = pool
                .iter()
                .copied()
                .filter(|&j| {
                    j != k && {
                        let pj = &data.pairs[j];
                        let d: f64 = pk
                            .x
                            .iter()
                            .zip(&pj.x)
                            .chain(pk.y.iter().zip(&pj.y))
                            .map(|(a, b)| (a - b).powi(2))
                            .sum();
                        d <= r2
                    }
                })
                .collect();
            (k, near)
        })
        .collect();
    for (k, near) in lists {
        out[k] = near;
    }
    out
}

/// Neighborhood vote: the mode holding the largest share of the labeled
/// neighbors, lower index on ties; `None` without labeled neighbors.
fn vote(neighbors: &[usize], labels: &[Option<usize>], modes: usize) -> Option<usize> {
    let mut counts = vec![0usize; modes];
    for &j in neighbors {
        if let Some(i) = labels[j] {
            counts[i] += 1;
        }
    }
    let (best, count) = counts
        .iter()
        .enumerate()
        .fold((0, 0), |acc, (i, &c)| if c > acc.1 { (i, c) } else { acc });
    (count > 0).then_some(best)
}

fn consistent_modes(laws: &[AffineLaw], data: &Dataset, k: usize, sigma_hat: f64) -> Vec<usize> {
    let s = &data.pairs[k];
    (0..laws.len())
        .filter(|&i| residual_norm(&laws[i], &s.x, &s.y) <= sigma_hat)
        .collect()
}

fn best_mode(laws: &[AffineLaw], data: &Dataset, k: usize) -> usize {
    let s = &data.pairs[k];
    (0..laws.len())
        .map(|i| (i, residual_norm(&laws[i], &s.x, &s.y)))
        .fold((0, f64::INFINITY), |acc, (i, r)| if r < acc.1 { (i, r) } else { acc })
        .0
}

fn to_labels(clusters: &[Vec<usize>], len: usize) -> Vec<Option<usize>> {
    let mut labels = vec![None; len];
    for (i, c) in clusters.iter().enumerate() {
        for &k in c {
            labels[k] = Some(i);
        }
    }
    labels
}

fn to_clusters(labels: &[Option<usize>], modes: usize) -> Vec<Vec<usize>> {
    let mut clusters = vec![Vec::new(); modes];
    for (k, l) in labels.iter().enumerate() {
        if let Some(i) = l {
            clusters[*i].push(k);
        }
    }
    clusters
}

fn laws_of(model: &PwaModel) -> Vec<AffineLaw> {
    model.modes().iter().map(|m| (m.a.clone(), m.b.clone())).collect()
}

fn default_radius(model: &PwaModel) -> Result<f64, IdentifyError> {
    let bb = model
        .domain()
        .bounding_box()?
        .ok_or_else(|| IdentifyError::InvalidConfig("empty domain".into()))?;
    Ok(0.1 * bb.diameter())
}

/// Outcome of a reassignment pass.
#[derive(Clone, Debug, PartialEq)]
pub struct Reassignment {
    pub clusters: Vec<Vec<usize>>,
    /// Samples that needed a vote but had no labeled neighbor.
    pub isolated: usize,
}

/// Moves every sample consistent with two or more modes to the mode that
/// owns the largest share of its joint-space neighbors. Votes read the
/// clusters as given (all samples updated simultaneously); samples without
/// labeled neighbors stay where they are.
pub fn reassign_undecidable(
    data: &Dataset,
    model: &PwaModel,
    clusters: &[Vec<usize>],
    sigma_hat: f64,
    ball_radius: f64,
) -> Reassignment {
    let laws = laws_of(model);
    let pool: Vec<usize> = (0..data.len()).collect();
    let nbrs = neighborhoods(data, &pool, ball_radius);
    let before = to_labels(clusters, data.len());
    let mut after = before.clone();
    let mut isolated = 0;
    for k in 0..data.len() {
        if consistent_modes(&laws, data, k, sigma_hat).len() >= 2 {
            match vote(&nbrs[k], &before, laws.len()) {
                Some(i) => after[k] = Some(i),
                None => isolated += 1,
            }
        }
    }
    Reassignment {
        clusters: to_clusters(&after, clusters.len().max(laws.len())),
        isolated,
    }
}

/// Unfeasible-sample handling: samples within `sigma_hat` of no mode are
/// discarded when their successor lies at least `sigma_hat` away from the
/// abstract successors of their own abstract state (or when no abstract
/// state contains them); the rest are placed by neighborhood vote, falling
/// back to the best-fitting mode. Without an abstraction nothing is
/// discarded.
pub fn prune_unfeasible(
    data: &Dataset,
    model: &PwaModel,
    clusters: &[Vec<usize>],
    abstraction: Option<&dyn SuccessorMap>,
    sigma_hat: f64,
    ball_radius: f64,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let laws = laws_of(model);
    let pool: Vec<usize> = (0..data.len()).collect();
    let nbrs = neighborhoods(data, &pool, ball_radius);
    let before = to_labels(clusters, data.len());
    let mut after = before.clone();
    let mut discarded = Vec::new();
    for k in 0..data.len() {
        if !consistent_modes(&laws, data, k, sigma_hat).is_empty() {
            continue;
        }
        if let Some(t) = abstraction {
            let s = &data.pairs[k];
            let far = match t.locate(&s.x) {
                Some(q) => t.successor_distance(q, &s.y) >= sigma_hat,
                None => {
                    log::debug!("sample {k} lies outside every abstract state");
                    true
                }
            };
            if far {
                after[k] = None;
                discarded.push(k);
                continue;
            }
        }
        after[k] = Some(vote(&nbrs[k], &before, laws.len()).unwrap_or_else(|| best_mode(&laws, data, k)));
    }
    (to_clusters(&after, laws.len()), discarded)
}

/// Iterative refinement: merge the closest pair of modes when their
/// dynamics are within the decayed merge threshold, relabel samples
/// (unique fits directly, undecidable ones by neighborhood vote,
/// unfeasible ones by the abstraction test then vote), discard modes whose
/// share falls below the decayed threshold, refit, and stop once no `A`
/// moves by more than `kappa`.
pub fn refine_identify(
    data: &Dataset,
    init: &IdentResult,
    abstraction: Option<&dyn SuccessorMap>,
    cfg: &IdentConfig,
) -> Result<IdentResult, IdentifyError> {
    cfg.validate()?;
    let sigma_hat = init.sigma_hat;
    let domain = init.model.domain().clone();
    let radius = match cfg.ball_radius {
        Some(r) => r,
        None => default_radius(&init.model)?,
    };
    let mut laws = laws_of(&init.model);
    let mut labels = to_labels(&init.clusters, data.len());
    let mut discarded: Vec<usize> = init.discarded.clone();
    let mut dropped = vec![false; data.len()];
    for &k in &discarded {
        dropped[k] = true;
    }
    let pool: Vec<usize> = (0..data.len()).filter(|&k| !dropped[k]).collect();
    let nbrs = neighborhoods(data, &pool, radius);
    let mut iterations = 0;

    for l in 1..=cfg.max_iterations {
        iterations = l;
        let decay = cfg.theta.powi(l as i32);

        if laws.len() >= 2 {
            let mut closest = (f64::INFINITY, 0, 0);
            for i in 0..laws.len() {
                for j in (i + 1)..laws.len() {
                    let d = (&laws[i].0 - &laws[j].0).norm();
                    if d < closest.0 {
                        closest = (d, i, j);
                    }
                }
            }
            let (d, i, j) = closest;
            if d <= decay * cfg.beta {
                log::debug!("iteration {l}: merging modes {i} and {j} (distance {d:.4})");
                let union: Vec<usize> = pool
                    .iter()
                    .copied()
                    .filter(|&k| matches!(labels[k], Some(c) if c == i || c == j))
                    .collect();
                if let Ok(law) = fit_affine(data, &union) {
                    laws[i] = law;
                }
                laws.remove(j);
                for lab in labels.iter_mut() {
                    *lab = match *lab {
                        Some(c) if c == j => Some(i),
                        Some(c) if c > j => Some(c - 1),
                        other => other,
                    };
                }
                for k in inliers(data, &pool, &laws[i], sigma_hat) {
                    labels[k] = Some(i);
                }
            }
        }

        loop {
            let before = labels.clone();
            for &k in &pool {
                if dropped[k] {
                    continue;
                }
                let consistent = consistent_modes(&laws, data, k, sigma_hat);
                match consistent.len() {
                    1 => labels[k] = Some(consistent[0]),
                    0 => {
                        if let Some(t) = abstraction {
                            let s = &data.pairs[k];
                            let far = match t.locate(&s.x) {
                                Some(q) => t.successor_distance(q, &s.y) >= sigma_hat,
                                None => true,
                            };
                            if far {
                                dropped[k] = true;
                                labels[k] = None;
                                discarded.push(k);
                                continue;
                            }
                        }
                        labels[k] = Some(
                            vote(&nbrs[k], &before, laws.len()).unwrap_or_else(|| {
                                before[k].filter(|c| *c < laws.len()).unwrap_or_else(|| best_mode(&laws, data, k))
                            }),
                        );
                    }
                    _ => {
                        if let Some(c) = vote(&nbrs[k], &before, laws.len()) {
                            labels[k] = Some(c);
                        } else if labels[k].is_none() {
                            labels[k] = Some(best_mode(&laws, data, k));
                        }
                    }
                }
            }
            let retained = pool.iter().filter(|&&k| !dropped[k]).count();
            if retained <= domain.dim() {
                return Err(IdentifyError::Collapse("every sample was discarded".into()));
            }
            if laws.len() < 2 {
                break;
            }
            let clusters = to_clusters(&labels, laws.len());
            let (smallest, size) = clusters
                .iter()
                .enumerate()
                .map(|(i, c)| (i, c.len()))
                .fold((0, usize::MAX), |acc, x| if x.1 < acc.1 { x } else { acc });
            if (size as f64) / (retained as f64) <= decay * cfg.mu {
                log::debug!("iteration {l}: discarding mode {smallest} ({size} samples)");
                laws.remove(smallest);
                for lab in labels.iter_mut() {
                    *lab = match *lab {
                        Some(c) if c == smallest => None,
                        Some(c) if c > smallest => Some(c - 1),
                        other => other,
                    };
                }
                continue;
            }
            break;
        }

        let clusters = to_clusters(&labels, laws.len());
        let old = laws.clone();
        let mut delta: f64 = 0.0;
        for (i, c) in clusters.iter().enumerate() {
            if let Ok(law) = fit_affine(data, c) {
                delta = delta.max((&law.0 - &old[i].0).norm());
                laws[i] = law;
            }
        }
        if delta <= cfg.kappa {
            break;
        }
    }

    // modes left with too few samples to pin an affine law are folded into
    // their best-fitting neighbors
    loop {
        let clusters = to_clusters(&labels, laws.len());
        let Some(small) = clusters.iter().position(|c| c.len() <= domain.dim()) else {
            break;
        };
        if laws.len() == 1 {
            return Err(IdentifyError::Collapse("no mode kept enough samples".into()));
        }
        laws.remove(small);
        for k in 0..labels.len() {
            labels[k] = match labels[k] {
                Some(c) if c == small => Some(best_mode(&laws, data, k)),
                Some(c) if c > small => Some(c - 1),
                other => other,
            };
        }
    }
    let clusters = to_clusters(&labels, laws.len());
    discarded.sort_unstable();
    assemble(data, laws, clusters, discarded, &domain, cfg, sigma_hat, iterations)
}
