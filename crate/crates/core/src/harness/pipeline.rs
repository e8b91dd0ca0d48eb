use serde::{Deserialize, Serialize};

use super::{sigma_search, HarnessError, PipelineConfig};
use crate::abstraction::{abstract_model, refine_abstraction, Abstraction, RefineReport};
use crate::dynamics::{generate_dataset, BlackBox, Dataset, PwaModel, Sample};
use crate::geometry::{sample_uniform, Region};
use crate::identify::{init_identify, refine_identify, IdentResult, IdentifyError};
use crate::logic::{parse_ltl, to_dba, BuchiAutomaton};
use crate::sample::{fit_error_models, select_next};
use crate::seeds;
use crate::verify::SigmaCertificate;

/// Seed paths below the master seed, one per stage.
const SEED_DATA: u64 = 1;
const SEED_IDENT: u64 = 2;
const SEED_REFINE: u64 = 3;
const SEED_SAMPLER: u64 = 4;
const SEED_SIGMA: u64 = 5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub samples: usize,
    pub modes: usize,
    pub residual: f64,
    pub states: usize,
    pub undecided_states: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineOutcome {
    pub model: PwaModel,
    pub ident: IdentResult,
    pub dataset: Dataset,
    pub abstraction: Abstraction,
    pub refine_report: RefineReport,
    pub rounds: Vec<RoundSummary>,
    /// Certificate against the benchmark at the smallest σ on the search grid.
    pub certificate: Option<SigmaCertificate>,
}

fn automaton(cfg: &PipelineConfig) -> Result<BuchiAutomaton, HarnessError> {
    Ok(to_dba(&parse_ltl(&cfg.formula, &cfg.atoms)?)?)
}

fn abstract_and_refine(
    model: &PwaModel,
    b: &BuchiAutomaton,
    cfg: &PipelineConfig,
    passes: usize,
) -> Result<(Abstraction, RefineReport), HarnessError> {
    let mut rcfg = cfg.refine_config(seeds::derive(cfg.seed, &[SEED_REFINE]));
    rcfg.max_passes = passes;
    let abs = abstract_model(model, &cfg.atoms, b, &cfg.grid, &rcfg)?;
    Ok(refine_abstraction(model, &cfg.atoms, b, abs, &rcfg)?)
}

/// Abstraction of a known model, refined for `benchmark_passes` passes.
pub fn benchmark_abstraction(truth: &PwaModel, cfg: &PipelineConfig) -> Result<Abstraction, HarnessError> {
    cfg.validate()?;
    let b = automaton(cfg)?;
    Ok(abstract_and_refine(truth, &b, cfg, cfg.benchmark_passes)?.0)
}

fn collapse(round: usize, samples: usize) -> impl FnOnce(IdentifyError) -> HarnessError {
    move |e| match e {
        IdentifyError::Collapse(message) => HarnessError::Collapse {
            round,
            samples,
            message,
        },
        other => HarnessError::Identify(other),
    }
}

fn error_norm(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

/// Identifies the black box from uniform initial data, then alternates
/// abstraction, abstraction-guided refinement of the identification and
/// batches of active queries until the budget is spent. The final model is
/// abstracted and, given a benchmark, certified against it.
pub fn run_pipeline(
    bb: &mut dyn BlackBox,
    cfg: &PipelineConfig,
    benchmark: Option<&Abstraction>,
) -> Result<PipelineOutcome, HarnessError> {
    cfg.validate()?;
    let b = automaton(cfg)?;
    let domain = bb.domain().clone();
    let xs = sample_uniform(
        &Region::from_polytope(domain.clone()),
        cfg.initial_sample_count,
        seeds::derive(cfg.seed, &[SEED_DATA]),
    )?;
    let mut data = generate_dataset(bb, &xs)?;
    let icfg = crate::identify::IdentConfig {
        seed: seeds::derive(cfg.seed, &[SEED_IDENT]),
        ..cfg.ident.clone()
    };
    let scfg = crate::sample::SamplerConfig {
        seed: seeds::derive(cfg.seed, &[SEED_SAMPLER]),
        ..cfg.sampler.clone()
    };

    let mut ident = init_identify(&data, &domain, &icfg).map_err(collapse(0, data.len()))?;
    let mut remaining = cfg.active_sample_budget;
    let mut picks = 0;
    let mut rounds = Vec::new();
    for round in 0.. {
        let (guide, _) = abstract_and_refine(&ident.model, &b, cfg, cfg.refinement_cap)?;
        ident = refine_identify(&data, &ident, Some(&guide.ts), &icfg).map_err(collapse(round, data.len()))?;
        rounds.push(RoundSummary {
            samples: data.len(),
            modes: ident.model.mode_count(),
            residual: ident.residual,
            states: guide.ts.cells().count(),
            undecided_states: guide.classification.undecided.len(),
        });
        if remaining == 0 {
            break;
        }
        let batch = remaining.min(cfg.batch_size);
        let mut gps = fit_error_models(&data, &ident.clusters, &ident.model, &scfg)?;
        let regions: Vec<Region> = ident
            .model
            .modes()
            .iter()
            .map(|m| Region::from_polytope(m.region.clone()))
            .collect();
        for _ in 0..batch {
            picks += 1;
            let sel = select_next(&gps, &regions, picks, &scfg)?;
            let y = bb.query(&sel.point)?;
            let err = error_norm(&ident.model.modes()[sel.mode].apply(&sel.point), &y);
            gps[sel.mode] = gps[sel.mode].with_observation(sel.point.clone(), err)?;
            data.push(Sample { x: sel.point, y });
        }
        remaining -= batch;
        log::info!("round {round}: {} samples, {} modes", data.len(), ident.model.mode_count());
    }

    let (abstraction, refine_report) = abstract_and_refine(&ident.model, &b, cfg, cfg.refinement_cap)?;
    let certificate = match benchmark {
        Some(bench) => {
            let search = sigma_search(
                &bench.ts,
                &abstraction.ts,
                cfg.sigma_step,
                cfg.hausdorff_samples,
                seeds::derive(cfg.seed, &[SEED_SIGMA]),
            )?;
            match search {
                Some(found) => {
                    let mut cert = found.certificate;
                    let sigma_e = ident.model.noise_sigma();
                    if sigma_e + cfg.bound_c > 0.0 && cert.sigma >= cfg.bound_epsilon {
                        cert.delta_bound = Some(crate::verify::confidence_bound(
                            cert.sigma,
                            cfg.bound_epsilon,
                            sigma_e,
                            cfg.bound_c,
                            Default::default(),
                        )?);
                    }
                    Some(cert)
                }
                None => None,
            }
        }
        None => None,
    };
    Ok(PipelineOutcome {
        model: ident.model.clone(),
        ident,
        dataset: data,
        abstraction,
        refine_report,
        rounds,
        certificate,
    })
}
