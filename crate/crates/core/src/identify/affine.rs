use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{AffineLaw, IdentifyError};
use crate::dynamics::Dataset;

/// Relative singular-value floor below which the regressor `[x; 1]` is
/// treated as rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Neighbors used by the local noise estimator.
const NOISE_NEIGHBORS: usize = 12;

/// Least-squares `(A, b)` minimizing `Σ ‖y_k − (A x_k + b)‖²` over the
/// selected samples.
pub fn fit_affine(data: &Dataset, idx: &[usize]) -> Result<AffineLaw, IdentifyError> {
    let n = data.dim().ok_or_else(|| IdentifyError::DegenerateCluster("empty dataset".into()))?;
    if idx.len() < n + 1 {
        return Err(IdentifyError::DegenerateCluster(format!(
            "{} points for {} unknowns per output",
            idx.len(),
            n + 1
        )));
    }
    let m = idx.len();
    let mut z = DMatrix::zeros(m, n + 1);
    let mut y = DMatrix::zeros(m, n);
    for (r, &k) in idx.iter().enumerate() {
        let s = &data.pairs[k];
        for j in 0..n {
            z[(r, j)] = s.x[j];
            y[(r, j)] = s.y[j];
        }
        z[(r, n)] = 1.0;
    }
    let svd = z.svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= RANK_TOL * sv.max().max(1.0) {
        return Err(IdentifyError::DegenerateCluster("regressor is rank deficient".into()));
    }
    let w = svd
        .solve(&y, 0.0)
        .map_err(|e| IdentifyError::DegenerateCluster(e.to_string()))?;
    let a = w.rows(0, n).transpose();
    let b = w.row(n).transpose();
    Ok((a, b))
}

pub fn residual_norm(law: &AffineLaw, x: &[f64], y: &[f64]) -> f64 {
    let (a, b) = law;
    let n = x.len();
    (0..n)
        .map(|i| {
            let pred: f64 = (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>() + b[i];
            (y[i] - pred).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

/// Robust per-axis noise deviation: each sample is predicted by an affine
/// fit through its nearest neighbors (itself excluded) and the median
/// absolute prediction error is rescaled to a Gaussian deviation. Samples
/// whose neighborhood straddles a mode boundary only affect the tail, which
/// the median ignores.
pub fn estimate_noise_sigma(data: &Dataset) -> Result<f64, IdentifyError> {
    let n = data.dim().unwrap_or(0);
    let k = NOISE_NEIGHBORS.min(data.len().saturating_sub(1));
    if k < n + 2 {
        return Err(IdentifyError::TooFewSamples {
            needed: n + 3,
            got: data.len(),
        });
    }
    let errors: Vec<f64> = (0..data.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = &data.pairs[i].x;
            let mut order: Vec<(f64, usize)> = (0..data.len())
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = xi.iter().zip(&data.pairs[j].x).map(|(a, b)| (a - b).powi(2)).sum();
                    (d, j)
                })
                .collect();
            order.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
            let idx: Vec<usize> = order[..k].iter().map(|p| p.1).collect();
            match fit_affine(data, &idx) {
                Ok((a, b)) => {
                    let pred = &a * DVector::from_column_slice(xi) + b;
                    data.pairs[i]
                        .y
                        .iter()
                        .zip(pred.iter())
                        .map(|(y, p)| (y - p).abs())
                        .collect::<Vec<_>>()
                }
                Err(_) => Vec::new(),
            }
        })
        .collect();
    if errors.is_empty() {
        return Err(IdentifyError::DegenerateCluster("no usable neighborhoods".into()));
    }
    let mut sorted = errors;
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    // leave-one-out prediction inflates the variance by (1 + p/k) for p
    // fitted coefficients
    let inflation = (1.0 + (n + 1) as f64 / k as f64).sqrt();
    Ok(median / 0.674_489_750_196_081_7 / inflation)
}
