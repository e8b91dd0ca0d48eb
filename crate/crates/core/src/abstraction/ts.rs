use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AbstractionError;
use crate::dynamics::PwaModel;
use crate::geometry::{BoundingBox, Polytope, Region};
use crate::identify::SuccessorMap;
use crate::logic::{eval_atoms, Atom, Truth};

/// Slack for closure membership when locating points on cell boundaries.
const LOCATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    /// Model modes whose regions overlap the state.
    pub modes: Vec<usize>,
    /// Truth of each atom, in the transition system's atom order.
    pub atoms: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsState {
    pub region: Region,
    pub obs: Observation,
}

/// Finite transition system whose states carry concrete footprints.
///
/// When some image leaves the domain, an extra sink state with an empty
/// footprint absorbs those transitions; it has no successors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTs", into = "RawTs")]
pub struct FiniteTS {
    domain: Polytope,
    atoms: Vec<String>,
    states: Vec<TsState>,
    succ: Vec<Vec<usize>>,
    sink: Option<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawTs {
    domain: Polytope,
    atoms: Vec<String>,
    states: Vec<TsState>,
    transitions: Vec<[usize; 2]>,
    #[serde(default)]
    sink: Option<usize>,
}

impl TryFrom<RawTs> for FiniteTS {
    type Error = AbstractionError;

    fn try_from(raw: RawTs) -> Result<Self, Self::Error> {
        let mut succ = vec![Vec::new(); raw.states.len()];
        for [i, j] in raw.transitions {
            if i >= succ.len() || j >= succ.len() {
                return Err(AbstractionError::Malformed(format!("transition {i}->{j} out of range")));
            }
            succ[i].push(j);
        }
        FiniteTS::new(raw.domain, raw.atoms, raw.states, succ, raw.sink)
    }
}

impl From<FiniteTS> for RawTs {
    fn from(ts: FiniteTS) -> Self {
        let transitions = ts
            .succ
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |j| [i, *j]))
            .collect();
        RawTs {
            domain: ts.domain,
            atoms: ts.atoms,
            states: ts.states,
            transitions,
            sink: ts.sink,
        }
    }
}

impl FiniteTS {
    /// Checks dimensions, observation widths and index ranges; successor
    /// lists are sorted and deduplicated.
    pub fn new(
        domain: Polytope,
        atoms: Vec<String>,
        states: Vec<TsState>,
        mut succ: Vec<Vec<usize>>,
        sink: Option<usize>,
    ) -> Result<Self, AbstractionError> {
        let n = states.len();
        if succ.len() != n {
            return Err(AbstractionError::Malformed("successor list count".into()));
        }
        if sink.is_some_and(|s| s >= n) {
            return Err(AbstractionError::Malformed("sink out of range".into()));
        }
        for (i, s) in states.iter().enumerate() {
            if s.region.dim() != domain.dim() {
                return Err(AbstractionError::Malformed(format!("state {i} has wrong dimension")));
            }
            if s.obs.atoms.len() != atoms.len() {
                return Err(AbstractionError::Malformed(format!("state {i} has wrong observation width")));
            }
        }
        for list in succ.iter_mut() {
            if list.iter().any(|j| *j >= n) {
                return Err(AbstractionError::Malformed("successor out of range".into()));
            }
            list.sort_unstable();
            list.dedup();
        }
        Ok(FiniteTS {
            domain,
            atoms,
            states,
            succ,
            sink,
        })
    }

    pub fn domain(&self) -> &Polytope {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[TsState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &TsState {
        &self.states[i]
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn is_deadlock(&self, i: usize) -> bool {
        self.succ[i].is_empty()
    }

    pub fn transition_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn has_transition(&self, i: usize, j: usize) -> bool {
        self.succ[i].binary_search(&j).is_ok()
    }

    /// States other than the sink.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |i| Some(*i) != self.sink)
    }

    /// Union of the footprints of `states`.
    pub fn footprint(&self, states: &[usize]) -> Region {
        let pieces = states
            .iter()
            .flat_map(|i| self.states[*i].region.pieces().iter().cloned())
            .collect();
        Region::from_pieces(self.dim(), pieces).expect("states share the dimension")
    }

    /// State containing `x`, or the sink when `x` is outside the domain.
    pub fn locate_state(&self, x: &[f64]) -> Option<usize> {
        if !self.domain.contains_closed(x, LOCATE_TOL) {
            return self.sink;
        }
        self.cells()
            .find(|i| self.states[*i].region.contains(x))
            .or_else(|| self.cells().find(|i| self.states[*i].region.contains_closed(x, LOCATE_TOL)))
    }

    /// Copy with the successor lists replaced.
    pub fn with_successors(&self, succ: Vec<Vec<usize>>) -> Result<Self, AbstractionError> {
        FiniteTS::new(self.domain.clone(), self.atoms.clone(), self.states.clone(), succ, self.sink)
    }

    /// Sub-system on `keep` (in that order), with transitions restricted to it.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self, AbstractionError> {
        let mut index = vec![usize::MAX; self.len()];
        for (new, old) in keep.iter().enumerate() {
            index[*old] = new;
        }
        let states = keep.iter().map(|i| self.states[*i].clone()).collect();
        let succ = keep
            .iter()
            .map(|i| {
                self.succ[*i]
                    .iter()
                    .filter(|j| index[**j] != usize::MAX)
                    .map(|j| index[*j])
                    .collect()
            })
            .collect();
        let sink = self.sink.and_then(|s| (index[s] != usize::MAX).then(|| index[s]));
        FiniteTS::new(self.domain.clone(), self.atoms.clone(), states, succ, sink)
    }
}

impl SuccessorMap for FiniteTS {
    fn locate(&self, x: &[f64]) -> Option<usize> {
        self.locate_state(x)
    }

    fn successor_distance(&self, state: usize, y: &[f64]) -> f64 {
        self.succ[state]
            .iter()
            .map(|j| {
                if Some(*j) == self.sink {
                    // The sink stands for everything outside the domain.
                    if self.domain.contains(y) {
                        self.domain.margin(y)
                    } else {
                        0.0
                    }
                } else {
                    self.states[*j].region.distance_to(y)
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Splits every polytope in `pieces` against each atom until no atom is
/// undecided on any piece. Returns pieces with their definite labels.
fn split_by_atoms(pieces: Vec<Polytope>, atoms: &[Atom]) -> Result<Vec<(Polytope, Vec<bool>)>, AbstractionError> {
    let mut work = pieces;
    for atom in atoms {
        let mut next = Vec::with_capacity(work.len());
        for p in work {
            let truth = eval_atoms(&Region::from_polytope(p.clone()), std::slice::from_ref(atom))?[0];
            if truth == Truth::Mixed {
                for half in [atom.inside()?, atom.outside()?] {
                    let q = p.intersect(&half)?;
                    if !q.is_empty()? {
                        next.push(q.prune_redundant()?);
                    }
                }
            } else {
                next.push(p);
            }
        }
        work = next;
    }
    work.into_iter()
        .map(|p| {
            let labels = eval_atoms(&Region::from_polytope(p.clone()), atoms)?
                .into_iter()
                .map(|t| match t {
                    Truth::True => Ok(true),
                    Truth::False => Ok(false),
                    Truth::Mixed => Err(AbstractionError::Malformed("atom split left a mixed piece".into())),
                })
                .collect::<Result<Vec<bool>, _>>()?;
            Ok((p, labels))
        })
        .collect()
}

/// Uniform grid over the domain's bounding box, each cell cut by the domain
/// and every mode region, then split until all atoms are definite.
pub fn initial_partition(model: &PwaModel, atoms: &[Atom], grid: &[usize]) -> Result<Vec<TsState>, AbstractionError> {
    let n = model.dim();
    if grid.len() != n || grid.contains(&0) {
        return Err(AbstractionError::InvalidConfig(format!(
            "grid needs {n} positive counts, got {grid:?}"
        )));
    }
    if let Some(a) = atoms.iter().find(|a| a.h.len() != n) {
        return Err(AbstractionError::InvalidConfig(format!("atom '{}' has wrong dimension", a.name)));
    }
    let bb = model
        .domain()
        .bounding_box()?
        .ok_or(AbstractionError::InvalidConfig("empty domain".into()))?;
    let total: usize = grid.iter().product();
    let mut cells = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let idx = rem % grid[j];
            rem /= grid[j];
            let w = (bb.upper[j] - bb.lower[j]) / grid[j] as f64;
            lower[j] = bb.lower[j] + idx as f64 * w;
            upper[j] = if idx + 1 == grid[j] { bb.upper[j] } else { bb.lower[j] + (idx + 1) as f64 * w };
        }
        cells.push(Polytope::boxed(&lower, &upper)?);
    }
    let per_cell: Vec<Vec<TsState>> = cells
        .par_iter()
        .map(|cell| -> Result<Vec<TsState>, AbstractionError> {
            let mut out = Vec::new();
            let in_domain = cell.intersect(model.domain())?;
            for (i, mode) in model.modes().iter().enumerate() {
                let piece = in_domain.intersect(&mode.region)?;
                if piece.is_empty()? {
                    continue;
                }
                for (p, labels) in split_by_atoms(vec![piece.prune_redundant()?], atoms)? {
                    out.push(TsState {
                        region: Region::from_polytope(p),
                        obs: Observation {
                            modes: vec![i],
                            atoms: labels,
                        },
                    });
                }
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    Ok(per_cell.into_iter().flatten().collect())
}

/// Box containing `{A x + b : x in bb}`.
fn image_box(bb: &BoundingBox, a: &DMatrix<f64>, b: &DVector<f64>) -> BoundingBox {
    let n = bb.dim();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let mut c = b[i];
        let mut r = 0.0;
        for j in 0..n {
            let mid = 0.5 * (bb.lower[j] + bb.upper[j]);
            let half = 0.5 * (bb.upper[j] - bb.lower[j]);
            c += a[(i, j)] * mid;
            r += a[(i, j)].abs() * half;
        }
        lower[i] = c - r;
        upper[i] = c + r;
    }
    BoundingBox { lower, upper }
}

/// Pieces of `state` inside mode `i`, each with its bounding box.
fn mode_pieces(
    model: &PwaModel,
    state: &TsState,
    i: usize,
) -> Result<Vec<(Polytope, BoundingBox)>, AbstractionError> {
    let mut out = Vec::new();
    for p in state.region.pieces() {
        let q = if state.obs.modes.len() == 1 {
            p.clone()
        } else {
            p.intersect(&model.modes()[i].region)?
        };
        if let Some(bb) = q.bounding_box()? {
            if !q.is_empty()? {
                out.push((q, bb));
            }
        }
    }
    Ok(out)
}

/// Existential quotient: `P -> P'` when some point of `P` in a mode `i`
/// listed by its observation is mapped by mode `i` into `P'`. Images that
/// leave the domain lead to a sink state appended at the end.
pub fn build_quotient(model: &PwaModel, atoms: &[Atom], states: Vec<TsState>) -> Result<FiniteTS, AbstractionError> {
    let n = model.dim();
    let names: Vec<String> = atoms.iter().map(|a| a.name.clone()).collect();
    let boxes: Vec<Vec<BoundingBox>> = states
        .par_iter()
        .map(|s| {
            s.region
                .pieces()
                .iter()
                .map(|p| Ok(p.bounding_box()?.unwrap_or_else(|| BoundingBox::new(vec![0.0; n], vec![0.0; n]).unwrap())))
                .collect::<Result<Vec<_>, AbstractionError>>()
        })
        .collect::<Result<_, _>>()?;
    let outer: Vec<Option<BoundingBox>> = boxes
        .iter()
        .map(|bs| bs.iter().cloned().reduce(|a, b| a.union(&b)))
        .collect();
    let dom_rows: Vec<(Vec<f64>, f64)> = (0..model.domain().num_halfspaces()).map(|r| model.domain().row(r)).collect();

    let rows: Vec<(Vec<usize>, bool)> = (0..states.len())
        .into_par_iter()
        .map(|s| -> Result<(Vec<usize>, bool), AbstractionError> {
            let mut succ = Vec::new();
            let mut leaves = false;
            for &i in &states[s].obs.modes {
                let mode = &model.modes()[i];
                for (piece, bb) in mode_pieces(model, &states[s], i)? {
                    let img = image_box(&bb, &mode.a, &mode.b);
                    for t in 0..states.len() {
                        if succ.contains(&t) {
                            continue;
                        }
                        let Some(tb) = &outer[t] else { continue };
                        if !img.overlaps(tb, 1e-9) {
                            continue;
                        }
                        for (target, pb) in states[t].region.pieces().iter().zip(&boxes[t]) {
                            if !img.overlaps(pb, 1e-9) {
                                continue;
                            }
                            let pre = target.affine_preimage(&mode.a, &mode.b)?;
                            if !piece.intersect(&pre)?.is_empty()? {
                                succ.push(t);
                                break;
                            }
                        }
                    }
                    if !leaves {
                        for (h, k) in &dom_rows {
                            let reach: f64 = (0..n)
                                .map(|j| if h[j] >= 0.0 { h[j] * img.upper[j] } else { h[j] * img.lower[j] })
                                .sum();
                            if reach <= *k {
                                continue;
                            }
                            let neg: Vec<f64> = h.iter().map(|v| -v).collect();
                            let outside = Polytope::halfspace(&neg, -k)?.affine_preimage(&mode.a, &mode.b)?;
                            if !piece.intersect(&outside)?.is_empty()? {
                                leaves = true;
                                break;
                            }
                        }
                    }
                }
            }
            succ.sort_unstable();
            Ok((succ, leaves))
        })
        .collect::<Result<_, _>>()?;

    let mut states = states;
    let mut succ: Vec<Vec<usize>> = Vec::with_capacity(states.len() + 1);
    let any_leaves = rows.iter().any(|r| r.1);
    let sink = any_leaves.then_some(states.len());
    for (mut list, leaves) in rows {
        if leaves {
            list.push(states.len());
        }
        succ.push(list);
    }
    if any_leaves {
        states.push(TsState {
            region: Region::empty(n),
            obs: Observation {
                modes: Vec::new(),
                atoms: vec![false; atoms.len()],
            },
        });
        succ.push(Vec::new());
    }
    FiniteTS::new(model.domain().clone(), names, states, succ, sink)
}
