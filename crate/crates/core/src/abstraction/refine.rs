use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_product, build_quotient, classify_states, initial_partition, AbstractionError, Classification, FiniteTS,
    ProductAutomaton, TsState,
};
use crate::dynamics::PwaModel;
use crate::geometry::{mc_volume, Polytope, Region, VolumeEstimate};
use crate::logic::{Atom, BuchiAutomaton};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefineConfig {
    /// Stop once the undecided footprint is below `eta` times the domain volume.
    pub eta: f64,
    pub max_passes: usize,
    /// Split pieces below this fraction of the domain volume are merged back.
    pub sliver_floor: f64,
    pub volume_samples: usize,
    pub seed: u64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            eta: 0.01,
            max_passes: 20,
            sliver_floor: 1e-6,
            volume_samples: 4000,
            seed: 0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), AbstractionError> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(AbstractionError::InvalidConfig(format!("eta {} outside (0,1)", self.eta)));
        }
        if self.volume_samples == 0 || !(self.sliver_floor >= 0.0) {
            return Err(AbstractionError::InvalidConfig("volume settings".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Abstraction {
    pub ts: FiniteTS,
    pub product: ProductAutomaton,
    pub classification: Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassStats {
    pub states: usize,
    pub undecided_states: usize,
    pub su_volume: VolumeEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineReport {
    /// Entry 0 describes the input; entry `k` the result of pass `k`.
    pub passes: Vec<PassStats>,
    /// The volume criterion was met before the pass cap.
    pub converged: bool,
    pub merged_slivers: usize,
}

fn area(p: &Polytope) -> Result<f64, AbstractionError> {
    if p.dim() == 2 {
        let v = p.vertices_2d();
        if v.len() < 3 {
            return Ok(0.0);
        }
        let twice: f64 = (0..v.len())
            .map(|i| {
                let (a, b) = (v[i], v[(i + 1) % v.len()]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum();
        return Ok(0.5 * twice.abs());
    }
    Ok(p.bounding_box()?.map_or(0.0, |b| b.volume()))
}

/// Exact area in the plane; the bounding-box volume in other dimensions.
fn region_size(r: &Region) -> Result<f64, AbstractionError> {
    r.pieces().iter().map(area).sum()
}

fn classify(ts: FiniteTS, b: &BuchiAutomaton, cfg: &RefineConfig) -> Result<Abstraction, AbstractionError> {
    let product = build_product(&ts, b)?;
    let mut classification = classify_states(&product);
    let footprint = ts.footprint(&classification.undecided_ts_states(&product));
    classification.su_volume = Some(mc_volume(&footprint, cfg.volume_samples, cfg.seed)?);
    Ok(Abstraction {
        ts,
        product,
        classification,
    })
}

/// Grid partition, quotient, product and classification in one step.
pub fn abstract_model(
    model: &PwaModel,
    atoms: &[Atom],
    b: &BuchiAutomaton,
    grid: &[usize],
    cfg: &RefineConfig,
) -> Result<Abstraction, AbstractionError> {
    let states = initial_partition(model, atoms, grid)?;
    classify(build_quotient(model, atoms, states)?, b, cfg)
}

/// `Pre` of `target` restricted to the modes of `source`.
fn predecessor(model: &PwaModel, ts: &FiniteTS, source: usize, target: usize) -> Result<Region, AbstractionError> {
    let n = ts.dim();
    let footprint = if Some(target) == ts.sink() {
        Region::from_polytope(Polytope::universe(n)).set_difference(&Region::from_polytope(ts.domain().clone()))?
    } else {
        ts.state(target).region.clone()
    };
    let modes = &ts.state(source).obs.modes;
    let mut pieces = Vec::new();
    for &i in modes {
        let mode = &model.modes()[i];
        let pre = footprint.affine_preimage(&mode.a, &mode.b)?;
        let pre = if modes.len() == 1 {
            pre
        } else {
            pre.intersect_polytope(&mode.region)?
        };
        pieces.extend(pre.into_pieces());
    }
    Ok(Region::from_pieces(n, pieces)?)
}

/// Splits `source` against the predecessor of each of its successors.
/// Returns the pieces and how many splits were refused as slivers.
fn split_state(
    model: &PwaModel,
    ts: &FiniteTS,
    source: usize,
    floor: f64,
) -> Result<(Vec<Region>, usize), AbstractionError> {
    let mut parts = vec![ts.state(source).region.clone()];
    let mut refused = 0;
    for &t in ts.successors(source) {
        let pre = predecessor(model, ts, source, t)?;
        let mut next = Vec::with_capacity(parts.len() + 1);
        for r in parts {
            let inside = r.intersect(&pre)?;
            if inside.is_empty()? {
                next.push(r);
                continue;
            }
            let outside = r.set_difference(&pre)?.without_empty_pieces()?;
            if outside.is_empty()? {
                next.push(r);
                continue;
            }
            if region_size(&inside)? < floor || region_size(&outside)? < floor {
                refused += 1;
                next.push(r);
                continue;
            }
            next.push(inside);
            next.push(outside);
        }
        parts = next;
    }
    Ok((parts, refused))
}

/// Predecessor splitting of every TS state underlying an undecided product
/// state, repeated until the undecided footprint falls below
/// `eta · |domain|` or the pass cap is reached.
pub fn refine_abstraction(
    model: &PwaModel,
    atoms: &[Atom],
    b: &BuchiAutomaton,
    abs: Abstraction,
    cfg: &RefineConfig,
) -> Result<(Abstraction, RefineReport), AbstractionError> {
    cfg.validate()?;
    let domain = Region::from_polytope(model.domain().clone());
    let domain_volume = region_size(&domain)?;
    let floor = cfg.sliver_floor * domain_volume;
    let stats = |a: &Abstraction| PassStats {
        states: a.ts.cells().count(),
        undecided_states: a.classification.undecided_ts_states(&a.product).len(),
        su_volume: a.classification.su_volume.expect("classified with volume"),
    };
    let mut abs = if abs.classification.su_volume.is_none() {
        classify(abs.ts, b, cfg)?
    } else {
        abs
    };
    let mut report = RefineReport {
        passes: vec![stats(&abs)],
        converged: false,
        merged_slivers: 0,
    };
    for pass in 0..cfg.max_passes {
        if stats(&abs).su_volume.value < cfg.eta * domain_volume {
            report.converged = true;
            break;
        }
        let ts = &abs.ts;
        let targets: Vec<usize> = abs
            .classification
            .undecided_ts_states(&abs.product)
            .into_iter()
            .filter(|q| Some(*q) != ts.sink())
            .collect();
        let splits: Vec<(usize, Vec<Region>, usize)> = targets
            .par_iter()
            .map(|&q| split_state(model, ts, q, floor).map(|(parts, refused)| (q, parts, refused)))
            .collect::<Result<_, _>>()?;
        let mut replaced: Vec<Option<Vec<Region>>> = vec![None; ts.len()];
        let mut grew = false;
        for (q, parts, refused) in splits {
            report.merged_slivers += refused;
            if parts.len() > 1 {
                grew = true;
                replaced[q] = Some(parts);
            }
        }
        if report.merged_slivers > 0 {
            log::debug!("pass {pass}: {} sliver splits refused so far", report.merged_slivers);
        }
        if !grew {
            break;
        }
        let mut states: Vec<TsState> = Vec::new();
        for q in ts.cells() {
            match replaced[q].take() {
                Some(parts) => states.extend(parts.into_iter().map(|region| TsState {
                    region,
                    obs: ts.state(q).obs.clone(),
                })),
                None => states.push(ts.state(q).clone()),
            }
        }
        abs = classify(build_quotient(model, atoms, states)?, b, cfg)?;
        report.passes.push(stats(&abs));
        log::debug!(
            "refinement pass {}: {} states, undecided volume {:.4}",
            pass + 1,
            report.passes.last().unwrap().states,
            report.passes.last().unwrap().su_volume.value
        );
    }
    if !report.converged && stats(&abs).su_volume.value < cfg.eta * domain_volume {
        report.converged = true;
    }
    Ok((abs, report))
}
