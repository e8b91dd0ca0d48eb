use std::collections::{HashMap, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use super::{AbstractionError, FiniteTS};
use crate::geometry::VolumeEstimate;
use crate::logic::{BuchiAutomaton, Letter};

/// Reachable part of `T × B`. Product state `(q, g)` means the automaton is
/// in `g` after reading the observations of the path up to and including `q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductAutomaton {
    pairs: Vec<(usize, usize)>,
    initial: Vec<usize>,
    succ: Vec<Vec<usize>>,
    accepting: Vec<bool>,
}

impl ProductAutomaton {
    /// Abstract product over an explicit graph, with state `i` standing for
    /// the pair `(i, 0)`. Every state is initial.
    pub fn from_graph(succ: Vec<Vec<usize>>, accepting: Vec<bool>) -> Result<Self, AbstractionError> {
        let n = succ.len();
        if accepting.len() != n || succ.iter().flatten().any(|j| *j >= n) {
            return Err(AbstractionError::Malformed("inconsistent product graph".into()));
        }
        Ok(ProductAutomaton {
            pairs: (0..n).map(|i| (i, 0)).collect(),
            initial: (0..n).collect(),
            succ,
            accepting,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(TS state, automaton state)` of product state `i`.
    pub fn pair(&self, i: usize) -> (usize, usize) {
        self.pairs[i]
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[i]
    }

    pub fn is_accepting(&self, i: usize) -> bool {
        self.accepting[i]
    }

    /// Product state index of a pair, if reachable.
    pub fn find(&self, q: usize, g: usize) -> Option<usize> {
        self.pairs.iter().position(|p| *p == (q, g))
    }
}

/// Letter observed in each TS state, over the automaton's atoms.
fn letters(ts: &FiniteTS, b: &BuchiAutomaton) -> Result<Vec<Letter>, AbstractionError> {
    let positions: Vec<usize> = b
        .atoms()
        .iter()
        .map(|a| {
            ts.atoms()
                .iter()
                .position(|t| t == a)
                .ok_or_else(|| AbstractionError::UnknownAtom(a.clone()))
        })
        .collect::<Result<_, _>>()?;
    Ok(ts
        .states()
        .iter()
        .map(|s| {
            positions
                .iter()
                .enumerate()
                .filter(|(_, p)| s.obs.atoms[**p])
                .fold(0, |acc, (i, _)| acc | (1 << i))
        })
        .collect())
}

/// Synchronous product: initial states `(q, δ(g0, o(q)))` for every TS
/// state `q`, and `(q, g) -> (q', δ(g, o(q')))` for every TS transition.
pub fn build_product(ts: &FiniteTS, b: &BuchiAutomaton) -> Result<ProductAutomaton, AbstractionError> {
    let obs = letters(ts, b)?;
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut queue = VecDeque::new();
    let mut initial = Vec::with_capacity(ts.len());
    let mut intern = |pair: (usize, usize), pairs: &mut Vec<(usize, usize)>, queue: &mut VecDeque<usize>| {
        *index.entry(pair).or_insert_with(|| {
            pairs.push(pair);
            queue.push_back(pairs.len() - 1);
            pairs.len() - 1
        })
    };
    for q in 0..ts.len() {
        let id = intern((q, b.step(b.initial(), obs[q])), &mut pairs, &mut queue);
        initial.push(id);
    }
    initial.sort_unstable();
    initial.dedup();
    let mut succ: Vec<Vec<usize>> = Vec::new();
    while let Some(p) = queue.pop_front() {
        let (q, g) = pairs[p];
        let mut list: Vec<usize> = ts
            .successors(q)
            .iter()
            .map(|&t| intern((t, b.step(g, obs[t])), &mut pairs, &mut queue))
            .collect();
        list.sort_unstable();
        list.dedup();
        if succ.len() <= p {
            succ.resize(p + 1, Vec::new());
        }
        succ[p] = list;
    }
    succ.resize(pairs.len(), Vec::new());
    let accepting = pairs.iter().map(|(_, g)| b.is_accepting(*g)).collect();
    Ok(ProductAutomaton {
        pairs,
        initial,
        succ,
        accepting,
    })
}

/// Partition of product states by the fate of their runs. Deadlocked runs
/// count as rejected.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    /// Every run is accepted.
    pub top: Vec<usize>,
    /// No run is accepted.
    pub bottom: Vec<usize>,
    /// Some runs are accepted and some are not.
    pub undecided: Vec<usize>,
    /// Concrete footprint volume of the TS states under `undecided`.
    pub su_volume: Option<VolumeEstimate>,
}

impl Classification {
    /// TS states underlying undecided product states, ascending.
    pub fn undecided_ts_states(&self, p: &ProductAutomaton) -> Vec<usize> {
        let mut out: Vec<usize> = self.undecided.iter().map(|i| p.pair(*i).0).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// States that can reach some state in `targets` (including themselves).
fn backward_closure(succ: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (i, list) in succ.iter().enumerate() {
        for &j in list {
            pred[j].push(i);
        }
    }
    let mut seen = targets.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|i| targets[*i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &pred[j] {
            if !seen[i] {
                seen[i] = true;
                stack.push(i);
            }
        }
    }
    seen
}

/// Members of SCCs that contain a cycle, over the subgraph induced by `keep`.
fn cyclic_members(succ: &[Vec<usize>], keep: &[bool]) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(succ.len(), 0);
    let nodes: Vec<_> = (0..succ.len()).map(|_| g.add_node(())).collect();
    for (i, list) in succ.iter().enumerate() {
        for &j in list {
            if keep[i] && keep[j] {
                g.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    tarjan_scc(&g)
        .into_iter()
        .map(|c| c.into_iter().map(|n| n.index()).collect::<Vec<_>>())
        .filter(|c| keep[c[0]] && (c.len() > 1 || succ[c[0]].contains(&c[0])))
        .collect()
}

/// `bottom`: no reachable cycle through an accepting state. `top`: no
/// reachable cycle avoiding accepting states and no reachable deadlock.
pub fn classify_states(p: &ProductAutomaton) -> Classification {
    let n = p.len();
    let mut good = vec![false; n];
    for c in cyclic_members(&p.succ, &vec![true; n]) {
        if c.iter().any(|i| p.accepting[*i]) {
            for i in c {
                good[i] = true;
            }
        }
    }
    let can_accept = backward_closure(&p.succ, &good);

    let non_accepting: Vec<bool> = p.accepting.iter().map(|a| !a).collect();
    let mut bad: Vec<bool> = p.succ.iter().map(Vec::is_empty).collect();
    for c in cyclic_members(&p.succ, &non_accepting) {
        for i in c {
            bad[i] = true;
        }
    }
    let can_reject = backward_closure(&p.succ, &bad);

    let mut out = Classification {
        top: Vec::new(),
        bottom: Vec::new(),
        undecided: Vec::new(),
        su_volume: None,
    };
    for i in 0..n {
        match (can_accept[i], can_reject[i]) {
            (false, _) => out.bottom.push(i),
            (true, false) => out.top.push(i),
            (true, true) => out.undecided.push(i),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_state_loops() {
        let acc = ProductAutomaton::from_graph(vec![vec![0]], vec![true]).unwrap();
        assert_eq!(classify_states(&acc).top, vec![0]);
        let rej = ProductAutomaton::from_graph(vec![vec![0]], vec![false]).unwrap();
        assert_eq!(classify_states(&rej).bottom, vec![0]);
    }

    #[test]
    fn deadlock_rejects() {
        let p = ProductAutomaton::from_graph(vec![vec![0, 1], vec![]], vec![true, true]).unwrap();
        let c = classify_states(&p);
        assert_eq!(c.undecided, vec![0]);
        assert_eq!(c.bottom, vec![1]);
    }

    #[test]
    fn choice_is_undecided() {
        // 0 -> {1 accepting loop, 2 rejecting loop}
        let p = ProductAutomaton::from_graph(vec![vec![1, 2], vec![1], vec![2]], vec![false, true, false]).unwrap();
        let c = classify_states(&p);
        assert_eq!((c.top, c.bottom, c.undecided), (vec![1], vec![2], vec![0]));
    }
}
