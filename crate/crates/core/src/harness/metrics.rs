use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::abstraction::FiniteTS;
use crate::dynamics::{PwaMode, PwaModel};
use crate::geometry::{hausdorff_distance, mc_volume, Region};
use crate::seeds;
use crate::verify::{check_with_distances, observation_distances, SigmaCertificate, SimulationOptions};

/// Points per side for region errors.
const REGION_SAMPLES: usize = 100;
/// First σ search window, in grid steps.
const FIRST_WINDOW: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub modes_true: usize,
    pub modes_est: usize,
    /// Set when the mode counts differ; unmatched modes are then charged a
    /// penalty (see `compute_metrics`).
    pub mode_count_mismatch: bool,
    pub param_error: f64,
    pub region_error: f64,
    /// Smallest σ on the search grid with benchmark ≺_σ learned.
    pub sigma: Option<f64>,
    /// `sigma` divided by the domain volume.
    pub sigma_bar: Option<f64>,
}

fn param_cost(a: &PwaMode, b: &PwaMode) -> f64 {
    (&a.a - &b.a).norm() + (&a.b - &b.b).norm()
}

fn mode_norm(m: &PwaMode) -> f64 {
    m.a.norm() + m.b.norm()
}

/// Assignment of estimated to true modes minimizing the summed parameter
/// error, by exhaustive search over injective maps from the smaller side.
/// Returns `(true index, estimated index)` pairs sorted by true index.
pub fn match_modes(truth: &PwaModel, est: &PwaModel) -> Vec<(usize, usize)> {
    let (t, e) = (truth.modes(), est.modes());
    let swap = t.len() > e.len();
    let (small, large) = if swap { (e, t) } else { (t, e) };
    let cost = |i: usize, j: usize| param_cost(&small[i], &large[j]);

    fn search(
        i: usize,
        n: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
        cost: &dyn Fn(usize, usize) -> f64,
    ) {
        if acc >= best.0 {
            return;
        }
        if i == n {
            *best = (acc, current.clone());
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                current.push(j);
                search(i + 1, n, used, current, acc + cost(i, j), best, cost);
                current.pop();
                used[j] = false;
            }
        }
    }

    let mut best = (f64::INFINITY, Vec::new());
    search(0, small.len(), &mut vec![false; large.len()], &mut Vec::new(), 0.0, &mut best, &cost);
    let mut pairs: Vec<(usize, usize)> = best
        .1
        .iter()
        .enumerate()
        .map(|(i, &j)| if swap { (j, i) } else { (i, j) })
        .collect();
    pairs.sort_unstable();
    pairs
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSearch {
    pub sigma: f64,
    pub certificate: SigmaCertificate,
}

/// Smallest `σ = step·j` at which `t1 ≺_σ t2`, or `None` if it fails even
/// at the domain diameter. Observation distances are computed for a
/// doubling window of σ values; holding is monotone in σ, so each window
/// is bisected.
pub fn sigma_search(
    t1: &FiniteTS,
    t2: &FiniteTS,
    step: f64,
    samples: usize,
    seed: u64,
) -> Result<Option<SigmaSearch>, HarnessError> {
    let diameter = t1
        .domain()
        .bounding_box()?
        .map_or(0.0, |b| b.diameter())
        .max(t2.domain().bounding_box()?.map_or(0.0, |b| b.diameter()));
    let last = (diameter / step).ceil() as usize + 1;
    let opts = SimulationOptions {
        samples,
        seed,
        ..Default::default()
    };
    let mut lo = 0;
    let mut window = FIRST_WINDOW.min(last);
    let mut dist = observation_distances(t1, t2, window as f64 * step, samples, seed)?;
    loop {
        dist.extend(t1, t2, window as f64 * step, samples, seed)?;
        let check = |j: usize| check_with_distances(t1, t2, &dist, j as f64 * step, &opts);
        if check(window)?.holds {
            let (mut a, mut b) = (lo, window);
            // invariant: holds at b, and fails below a
            while a < b {
                let mid = (a + b) / 2;
                if check(mid)?.holds {
                    b = mid;
                } else {
                    a = mid + 1;
                }
            }
            let certificate = check(b)?;
            return Ok(Some(SigmaSearch {
                sigma: certificate.sigma,
                certificate,
            }));
        }
        if window == last {
            return Ok(None);
        }
        lo = window + 1;
        window = (2 * window).min(last);
    }
}

/// Parameter and region errors of an identified model.
///
/// Parameter error sums `‖Â_i − A_i‖_F + ‖b̂_i − b_i‖₂` and region error sums
/// sampled Hausdorff distances, both over the optimal mode matching. When
/// the counts differ, each unmatched mode adds `‖A‖_F + ‖b‖₂` to the
/// parameter error and the domain diameter to the region error.
pub fn identification_errors(truth: &PwaModel, est: &PwaModel, seed: u64) -> Result<(f64, f64), HarnessError> {
    let pairs = match_modes(truth, est);
    let domain = Region::from_polytope(truth.domain().clone());
    let diameter = domain.bounding_box()?.map_or(0.0, |b| b.diameter());
    let mut param_error = 0.0;
    let mut region_error = 0.0;
    for &(i, j) in &pairs {
        param_error += param_cost(&truth.modes()[i], &est.modes()[j]);
        region_error += hausdorff_distance(
            &Region::from_polytope(truth.modes()[i].region.clone()),
            &Region::from_polytope(est.modes()[j].region.clone()),
            REGION_SAMPLES,
            seeds::derive(seed, &[i as u64, j as u64]),
        )?;
    }
    let unmatched_true = (0..truth.mode_count()).filter(|i| !pairs.iter().any(|p| p.0 == *i));
    let unmatched_est = (0..est.mode_count()).filter(|j| !pairs.iter().any(|p| p.1 == *j));
    for i in unmatched_true {
        param_error += mode_norm(&truth.modes()[i]);
        region_error += diameter;
    }
    for j in unmatched_est {
        param_error += mode_norm(&est.modes()[j]);
        region_error += diameter;
    }
    Ok((param_error, region_error))
}

/// Identification errors plus the normalized abstraction error σ̄ of one
/// trial.
pub fn compute_metrics(
    truth: &PwaModel,
    est: &PwaModel,
    benchmark: &FiniteTS,
    got: &FiniteTS,
    sigma_step: f64,
    hausdorff_samples: usize,
    seed: u64,
) -> Result<TrialMetrics, HarnessError> {
    let (param_error, region_error) = identification_errors(truth, est, seed)?;
    let domain = Region::from_polytope(truth.domain().clone());
    let volume = mc_volume(&domain, 10_000, seed)?.value;
    let sigma = sigma_search(benchmark, got, sigma_step, hausdorff_samples, seed)?.map(|s| s.sigma);
    Ok(TrialMetrics {
        modes_true: truth.mode_count(),
        modes_est: est.mode_count(),
        mode_count_mismatch: truth.mode_count() != est.mode_count(),
        param_error,
        region_error,
        sigma,
        sigma_bar: sigma.map(|s| s / volume),
    })
}
