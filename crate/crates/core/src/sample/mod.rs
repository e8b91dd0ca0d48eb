//! Active selection of black-box queries from Gaussian-process models of
//! each mode's prediction error.

mod gp;

pub use gp::{gp_posterior, GpModel, Kernel};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Dataset, PwaModel};
use crate::geometry::{sample_uniform, GeometryError, Region};
use crate::seeds;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("Cholesky factorization failed even with jitter {jitter:e}")]
    Cholesky { jitter: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaMode {
    Constant,
    Logdet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    /// Norm bound `B` in the confidence schedule.
    pub norm_bound: f64,
    /// Failure probability in (0, 1).
    pub failure_prob: f64,
    pub gamma_mode: GammaMode,
    /// `γ_t` used when `gamma_mode` is constant.
    pub gamma: f64,
    /// Kernel lengthscale; `None` means 20% of the domain diameter.
    pub lengthscale: Option<f64>,
    pub signal_var: f64,
    pub noise_var: f64,
    pub jitter: f64,
    pub candidate_count: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            norm_bound: 1.0,
            failure_prob: 0.1,
            gamma_mode: GammaMode::Logdet,
            gamma: 1.0,
            lengthscale: None,
            signal_var: 1.0,
            noise_var: 1e-2,
            jitter: 1e-8,
            candidate_count: 500,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SampleError> {
        let bad = |m: &str| Err(SampleError::InvalidConfig(m.to_string()));
        if !(self.failure_prob > 0.0 && self.failure_prob < 1.0) {
            return bad("failure_prob must lie in (0, 1)");
        }
        if self.candidate_count == 0 {
            return bad("candidate_count must be at least 1");
        }
        if !(self.signal_var > 0.0) || self.lengthscale.is_some_and(|l| !(l > 0.0)) {
            return bad("kernel parameters must be positive");
        }
        if !(self.noise_var >= 0.0 && self.jitter >= 0.0 && self.norm_bound >= 0.0 && self.gamma >= 0.0) {
            return bad("noise_var, jitter, norm_bound and gamma must be non-negative");
        }
        Ok(())
    }

    pub fn kernel(&self, domain_diameter: f64) -> Kernel {
        Kernel {
            lengthscale: self.lengthscale.unwrap_or(0.2 * domain_diameter),
            signal_var: self.signal_var,
        }
    }
}

/// `λ_t = 2B + 300 γ_t log³(t/ρ)`, with the log term clamped at 0 when
/// `t/ρ ≤ 1`. `gp` supplies `γ_t` in log-det mode.
pub fn lambda_schedule(t: usize, gp: Option<&GpModel>, cfg: &SamplerConfig) -> f64 {
    let gamma = match cfg.gamma_mode {
        GammaMode::Constant => cfg.gamma,
        GammaMode::Logdet => gp.map_or(0.0, GpModel::log_det_gain),
    };
    let log_term = (t.max(1) as f64 / cfg.failure_prob).ln().max(0.0);
    2.0 * cfg.norm_bound + 300.0 * gamma * log_term.powi(3)
}

/// One GP per mode over the prediction-error magnitudes `|y - f_i(x)|` of
/// the samples attributed to that mode.
pub fn fit_error_models(
    data: &Dataset,
    clusters: &[Vec<usize>],
    model: &PwaModel,
    cfg: &SamplerConfig,
) -> Result<Vec<GpModel>, SampleError> {
    cfg.validate()?;
    let diameter = model.domain().bounding_box()?.map_or(1.0, |b| b.diameter());
    let kernel = cfg.kernel(diameter);
    model
        .modes()
        .iter()
        .enumerate()
        .map(|(i, mode)| {
            let idx = clusters.get(i).map_or(&[][..], |c| c.as_slice());
            let inputs = idx.iter().map(|k| data.pairs[*k].x.clone()).collect();
            let targets = idx
                .iter()
                .map(|k| {
                    let s = &data.pairs[*k];
                    let pred = mode.apply(&s.x);
                    pred.iter().zip(&s.y).map(|(p, y)| (p - y) * (p - y)).sum::<f64>().sqrt()
                })
                .collect();
            GpModel::fit(inputs, targets, kernel, cfg.noise_var, cfg.jitter)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub mode: usize,
    pub point: Vec<f64>,
    pub acquisition: f64,
    /// Per mode: largest posterior mean over its candidates.
    pub mean_max: Vec<f64>,
}

/// Per mode, maximizes `Ψ(x) + λ_t^{1/2} ϱ(x)` over seeded uniform
/// candidates of the region (`ϱ` the posterior standard deviation), then
/// picks the mode whose largest posterior mean is smallest (ties to the
/// lower index) and returns its maximizer.
pub fn select_next(models: &[GpModel], regions: &[Region], t: usize, cfg: &SamplerConfig) -> Result<Selection, SampleError> {
    cfg.validate()?;
    if models.is_empty() || models.len() != regions.len() {
        return Err(SampleError::InvalidConfig("need one region per GP model".into()));
    }
    let per_mode: Vec<(f64, Vec<f64>, f64)> = models
        .par_iter()
        .zip(regions.par_iter())
        .enumerate()
        .map(|(i, (gp, region))| {
            let seed = seeds::derive(cfg.seed, &[t as u64, i as u64]);
            let candidates = sample_uniform(region, cfg.candidate_count, seed)?;
            let root = lambda_schedule(t, Some(gp), cfg).sqrt();
            let mut mean_max = f64::NEG_INFINITY;
            let mut best = (f64::NEG_INFINITY, Vec::new());
            for x in candidates {
                let (mean, var) = gp.posterior(&x);
                mean_max = mean_max.max(mean);
                let acq = mean + root * var.sqrt();
                if acq > best.0 {
                    best = (acq, x);
                }
            }
            Ok((mean_max, best.1, best.0))
        })
        .collect::<Result<_, SampleError>>()?;
    let mut mode = 0;
    for (i, m) in per_mode.iter().enumerate() {
        if m.0 < per_mode[mode].0 {
            mode = i;
        }
    }
    Ok(Selection {
        mode,
        point: per_mode[mode].1.clone(),
        acquisition: per_mode[mode].2,
        mean_max: per_mode.iter().map(|m| m.0).collect(),
    })
}
