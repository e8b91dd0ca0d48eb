use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::affine::{estimate_noise_sigma, fit_affine, residual_norm};
use super::{assemble, AffineLaw, IdentConfig, IdentResult, IdentifyError};
use crate::dynamics::Dataset;
use crate::geometry::Polytope;
use crate::seeds;

/// Inlier threshold: the configured value, or three robust noise
/// deviations, floored so that exact data still has a positive tolerance.
pub(crate) fn resolve_sigma_hat(data: &Dataset, cfg: &IdentConfig) -> Result<f64, IdentifyError> {
    let scale = data
        .pairs
        .iter()
        .flat_map(|s| s.y.iter())
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let raw = match cfg.sigma_hat {
        Some(s) => return Ok(s),
        None => 3.0 * estimate_noise_sigma(data)?,
    };
    Ok(raw.max(1e-6 * scale))
}

/// Randomized peeling: each round keeps the candidate affine law with the
/// most inliers among the unexplained samples, refits it by least squares
/// and removes its inliers, until fewer than `r·K` samples remain.
///
/// Candidates are exact affine interpolants through `N+1` samples drawn
/// from the unexplained set, each from its own seeded stream.
pub fn init_identify(data: &Dataset, domain: &Polytope, cfg: &IdentConfig) -> Result<IdentResult, IdentifyError> {
    cfg.validate()?;
    let n = domain.dim();
    let k_total = data.len();
    if k_total < 2 * (n + 1) {
        return Err(IdentifyError::TooFewSamples {
            needed: 2 * (n + 1),
            got: k_total,
        });
    }
    let sigma_hat = resolve_sigma_hat(data, cfg)?;
    let mut remaining: Vec<usize> = (0..k_total).collect();
    let mut laws: Vec<AffineLaw> = Vec::new();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut round = 0u64;
    while remaining.len() as f64 >= cfg.r * k_total as f64 && remaining.len() > n + 1 {
        let best = (0..cfg.candidates)
            .into_par_iter()
            .filter_map(|j| {
                let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[round, j as u64]));
                let pick: Vec<usize> = index::sample(&mut rng, remaining.len(), n + 1)
                    .into_iter()
                    .map(|p| remaining[p])
                    .collect();
                let law = fit_affine(data, &pick).ok()?;
                let count = inliers(data, &remaining, &law, sigma_hat).len();
                Some((count, j, law))
            })
            .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        log::trace!("round {round}: best candidate {:?} of {} remaining", best.as_ref().map(|b| b.0), remaining.len());
        // a candidate interpolates its own N+1 samples, so at least one more
        // inlier is needed before it counts as evidence of a mode
        let Some((count, _, law)) = best.filter(|b| b.0 > n + 1) else {
            if laws.is_empty() {
                return Err(IdentifyError::ThresholdTooTight {
                    sigma_hat,
                    needed: n + 2,
                });
            }
            break;
        };
        let first = inliers(data, &remaining, &law, sigma_hat);
        debug_assert_eq!(first.len(), count);
        let (law, members) = match fit_affine(data, &first) {
            Ok(refit) => {
                let again = inliers(data, &remaining, &refit, sigma_hat);
                if again.len() > n {
                    (refit, again)
                } else {
                    (law, first)
                }
            }
            Err(_) => (law, first),
        };
        remaining.retain(|k| members.binary_search(k).is_err());
        laws.push(law);
        clusters.push(members);
        round += 1;
    }
    log::debug!("initialization found {} modes at sigma_hat {sigma_hat:.4}", laws.len());
    assemble(data, laws, clusters, Vec::new(), domain, cfg, sigma_hat, 0)
}

/// Sorted indices of `pool` within `sigma_hat` of `law`.
pub(crate) fn inliers(data: &Dataset, pool: &[usize], law: &AffineLaw, sigma_hat: f64) -> Vec<usize> {
    let mut out: Vec<usize> = pool
        .iter()
        .copied()
        .filter(|&k| residual_norm(law, &data.pairs[k].x, &data.pairs[k].y) <= sigma_hat)
        .collect();
    out.sort_unstable();
    out
}
