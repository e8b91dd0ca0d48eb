use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::IdentifyError;
use crate::dynamics::Dataset;
use crate::geometry::Polytope;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    /// L2 regularization weight.
    pub lambda: f64,
    /// Newton iterations per one-vs-rest separator.
    pub iterations: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            lambda: 1e-7,
            iterations: 100,
        }
    }
}

/// Linear separators between clusters, combined into one region per
/// cluster.
///
/// One soft-margin linear score per cluster (one-vs-rest, squared hinge)
/// is trained on standardized features. Region `i` is the part of the
/// domain where score `i` beats every other score, so the regions tile the
/// domain and the boundary between `i` and `j` is the zero set of
/// `w_j − w_i`.
pub fn fit_boundaries(
    data: &Dataset,
    clusters: &[Vec<usize>],
    domain: &Polytope,
    cfg: &SvmConfig,
) -> Result<Vec<Polytope>, IdentifyError> {
    let s = clusters.len();
    if s < 2 {
        return Err(IdentifyError::SingleCluster);
    }
    if let Some(i) = clusters.iter().position(Vec::is_empty) {
        return Err(IdentifyError::DegenerateCluster(format!("cluster {i} is empty")));
    }
    let n = domain.dim();
    let points: Vec<(&[f64], usize)> = clusters
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |&k| (data.pairs[k].x.as_slice(), i)))
        .collect();
    let m = points.len() as f64;

    let mut mean = vec![0.0; n];
    for (x, _) in &points {
        for d in 0..n {
            mean[d] += x[d] / m;
        }
    }
    let mut scale = vec![0.0; n];
    for (x, _) in &points {
        for d in 0..n {
            scale[d] += (x[d] - mean[d]).powi(2) / m;
        }
    }
    for v in &mut scale {
        *v = if *v > 1e-24 { v.sqrt() } else { 1.0 };
    }
    let features: Vec<(Vec<f64>, usize)> = points
        .iter()
        .map(|(x, i)| {
            let mut z: Vec<f64> = (0..n).map(|d| (x[d] - mean[d]) / scale[d]).collect();
            z.push(1.0);
            (z, *i)
        })
        .collect();

    let w = train(&features, s, n + 1, cfg);

    let centroids: Vec<Vec<f64>> = clusters
        .iter()
        .map(|c| {
            let mut acc = vec![0.0; n];
            for &k in c {
                for d in 0..n {
                    acc[d] += data.pairs[k].x[d] / c.len() as f64;
                }
            }
            acc
        })
        .collect();

    let mut regions = Vec::with_capacity(s);
    for i in 0..s {
        let mut region = domain.clone();
        for j in (0..s).filter(|&j| j != i) {
            let delta: Vec<f64> = (0..=n).map(|d| w[j][d] - w[i][d]).collect();
            let mut normal: Vec<f64> = (0..n).map(|d| delta[d] / scale[d]).collect();
            let mut offset: f64 = (0..n).map(|d| delta[d] * mean[d] / scale[d]).sum::<f64>() - delta[n];
            let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-9 {
                log::warn!("clusters {i} and {j} are not separated; using the centroid bisector");
                (normal, offset) = bisector(&centroids[i], &centroids[j], i < j);
            } else {
                normal.iter_mut().for_each(|v| *v /= norm);
                offset /= norm;
            }
            region = region.with_halfspace(&normal, offset)?;
        }
        regions.push(region.prune_redundant()?);
    }
    Ok(regions)
}

/// Halfspace containing `ci`, bounded by the perpendicular bisector of the
/// two centroids. Coinciding centroids are split along the first axis, the
/// lower-index cluster taking the lower side.
fn bisector(ci: &[f64], cj: &[f64], lower_index: bool) -> (Vec<f64>, f64) {
    let n = ci.len();
    let mut normal: Vec<f64> = (0..n).map(|d| cj[d] - ci[d]).collect();
    let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        normal = vec![0.0; n];
        normal[0] = if lower_index { 1.0 } else { -1.0 };
    } else {
        normal.iter_mut().for_each(|v| *v /= norm);
    }
    let offset = (0..n).map(|d| normal[d] * 0.5 * (ci[d] + cj[d])).sum();
    (normal, offset)
}

/// One-vs-rest weights, each minimizing
/// `λ/2 ‖w‖² + mean(max(0, 1 − y w·z)²)` (bias unregularized) by
/// generalized Newton steps with backtracking.
fn train(features: &[(Vec<f64>, usize)], classes: usize, width: usize, cfg: &SvmConfig) -> Vec<Vec<f64>> {
    (0..classes)
        .map(|c| {
            let signed: Vec<(&[f64], f64)> = features
                .iter()
                .map(|(z, y)| (z.as_slice(), if *y == c { 1.0 } else { -1.0 }))
                .collect();
            train_binary(&signed, width, cfg)
        })
        .collect()
}

fn train_binary(points: &[(&[f64], f64)], width: usize, cfg: &SvmConfig) -> Vec<f64> {
    let m = points.len() as f64;
    let lambda = cfg.lambda;
    let objective = |w: &[f64]| -> f64 {
        let reg: f64 = w[..width - 1].iter().map(|v| v * v).sum::<f64>() * 0.5 * lambda;
        let loss: f64 = points
            .iter()
            .map(|(z, y)| {
                let slack = 1.0 - y * dot(w, z);
                if slack > 0.0 { slack * slack } else { 0.0 }
            })
            .sum::<f64>()
            / m;
        reg + loss
    };
    let mut w = vec![0.0; width];
    let mut value = objective(&w);
    for _ in 0..cfg.iterations {
        let mut grad = DVector::zeros(width);
        let mut hess = DMatrix::zeros(width, width);
        for d in 0..width - 1 {
            grad[d] = lambda * w[d];
            hess[(d, d)] = lambda;
        }
        hess[(width - 1, width - 1)] = 1e-12;
        for (z, y) in points {
            let slack = 1.0 - y * dot(&w, z);
            if slack > 0.0 {
                for a in 0..width {
                    grad[a] -= 2.0 / m * y * slack * z[a];
                    for b in 0..width {
                        hess[(a, b)] += 2.0 / m * z[a] * z[b];
                    }
                }
            }
        }
        if grad.norm() < 1e-12 {
            break;
        }
        let Some(step) = hess.cholesky().map(|ch| ch.solve(&(-&grad))) else {
            break;
        };
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-10 {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let v = objective(&trial);
            if v <= value + 1e-4 * t * slope {
                w = trial;
                value = v;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
