//! Deterministic Büchi automata for conjunctions of the patterns
//! `ψ`, `G ψ`, `F ψ`, `G F ψ` and `ψ1 U ψ2` with propositional `ψ`.
//!
//! `G` distributes over `&`, so `G(p1 & F p2)` becomes `G p1 & G F p2`.
//! Each pattern keeps a small monitor state; recurrence conditions are
//! degeneralized with a round-robin counter. The reachable product of the
//! monitors is built breadth-first and then minimized.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write;

use serde::Serialize;

use super::{LogicError, LtlFormula};

/// Truth assignment over the automaton's atoms: bit `i` is atom `i`.
pub type Letter = u32;

const MAX_ATOMS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BuchiAutomaton {
    atoms: Vec<String>,
    initial: usize,
    accepting: Vec<bool>,
    /// `delta[state][letter]`.
    delta: Vec<Vec<usize>>,
}

impl BuchiAutomaton {
    /// Atom names in bit order.
    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn num_letters(&self) -> usize {
        1 << self.atoms.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    pub fn step(&self, state: usize, letter: Letter) -> usize {
        self.delta[state][letter as usize]
    }

    /// Letter for a valuation given by atom name.
    pub fn letter(&self, value: &dyn Fn(&str) -> bool) -> Letter {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(_, a)| value(a))
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    /// Whether the run on `prefix · cycle^ω` visits `F` infinitely often.
    pub fn accepts_lasso(&self, prefix: &[Letter], cycle: &[Letter]) -> bool {
        assert!(!cycle.is_empty(), "lasso cycle must be nonempty");
        let mut q = prefix.iter().fold(self.initial, |q, l| self.step(q, *l));
        let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
        let mut trace = Vec::new();
        let mut pos = 0;
        loop {
            if let Some(&start) = seen.get(&(q, pos)) {
                return trace[start..].iter().any(|s| self.accepting[*s]);
            }
            seen.insert((q, pos), trace.len());
            q = self.step(q, cycle[pos]);
            trace.push(q);
            pos = (pos + 1) % cycle.len();
        }
    }

    /// A non-accepting state whose every letter loops back to itself.
    pub fn sink(&self) -> Option<usize> {
        (0..self.num_states()).find(|&s| !self.accepting[s] && self.delta[s].iter().all(|t| *t == s))
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph buchi {\n  rankdir=LR;\n  init [shape=point];\n");
        for s in 0..self.num_states() {
            let shape = if self.accepting[s] { "doublecircle" } else { "circle" };
            writeln!(out, "  q{s} [shape={shape}];").unwrap();
        }
        writeln!(out, "  init -> q{};", self.initial).unwrap();
        for s in 0..self.num_states() {
            let mut by_target: Vec<(usize, Vec<String>)> = Vec::new();
            for (l, &t) in self.delta[s].iter().enumerate() {
                let label = self.letter_label(l as Letter);
                match by_target.iter_mut().find(|(tt, _)| *tt == t) {
                    Some((_, ls)) => ls.push(label),
                    None => by_target.push((t, vec![label])),
                }
            }
            for (t, labels) in by_target {
                let label = if labels.len() == self.num_letters() {
                    "true".to_string()
                } else {
                    labels.join(" | ")
                };
                writeln!(out, "  q{s} -> q{t} [label=\"{label}\"];").unwrap();
            }
        }
        out.push_str("}\n");
        out
    }

    fn letter_label(&self, l: Letter) -> String {
        if self.atoms.is_empty() {
            return "true".into();
        }
        self.atoms
            .iter()
            .enumerate()
            .map(|(i, a)| if l & (1 << i) != 0 { a.clone() } else { format!("!{a}") })
            .collect::<Vec<_>>()
            .join("&")
    }
}

enum Pattern {
    Init(LtlFormula),
    Safety(LtlFormula),
    Reach(LtlFormula),
    Recur(LtlFormula),
    Until(LtlFormula, LtlFormula),
}

/// Negation normal form; fails on negated `U`.
fn nnf(f: &LtlFormula, neg: bool) -> Result<LtlFormula, LogicError> {
    use LtlFormula as L;
    Ok(match (f, neg) {
        (L::True, false) | (L::False, true) => L::True,
        (L::True, true) | (L::False, false) => L::False,
        (L::Atom(_), false) => f.clone(),
        (L::Atom(_), true) => L::not(f.clone()),
        (L::Not(g), _) => nnf(g, !neg)?,
        (L::And(a, b), false) | (L::Or(a, b), true) => L::and(nnf(a, neg)?, nnf(b, neg)?),
        (L::Or(a, b), false) | (L::And(a, b), true) => L::or(nnf(a, neg)?, nnf(b, neg)?),
        (L::Next(g), _) => L::next(nnf(g, neg)?),
        (L::Eventually(g), false) | (L::Always(g), true) => L::eventually(nnf(g, neg)?),
        (L::Always(g), false) | (L::Eventually(g), true) => L::always(nnf(g, neg)?),
        (L::Until(a, b), false) => L::until(nnf(a, false)?, nnf(b, false)?),
        (L::Until(..), true) => {
            return Err(LogicError::UnsupportedFragment(format!("negated until in {f}")));
        }
    })
}

fn collect_patterns(f: LtlFormula, out: &mut Vec<Pattern>) -> Result<(), LogicError> {
    use LtlFormula as L;
    if f.is_propositional() {
        out.push(Pattern::Init(f));
        return Ok(());
    }
    let unsupported = |g: &LtlFormula| Err(LogicError::UnsupportedFragment(g.to_string()));
    match f {
        L::And(a, b) => {
            collect_patterns(*a, out)?;
            collect_patterns(*b, out)
        }
        L::Always(g) => match *g {
            L::And(a, b) => {
                collect_patterns(L::always(*a), out)?;
                collect_patterns(L::always(*b), out)
            }
            L::Always(h) => collect_patterns(L::always(*h), out),
            p if p.is_propositional() => {
                out.push(Pattern::Safety(p));
                Ok(())
            }
            L::Eventually(h) => match *h {
                L::Eventually(p) => collect_patterns(L::always(L::eventually(*p)), out),
                p if p.is_propositional() => {
                    out.push(Pattern::Recur(p));
                    Ok(())
                }
                other => unsupported(&L::always(L::eventually(other))),
            },
            other => unsupported(&L::always(other)),
        },
        L::Eventually(g) => match *g {
            L::Eventually(h) => collect_patterns(L::eventually(*h), out),
            p if p.is_propositional() => {
                out.push(Pattern::Reach(p));
                Ok(())
            }
            L::Always(h) => match *h {
                L::Eventually(p) if p.is_propositional() => {
                    out.push(Pattern::Recur(*p));
                    Ok(())
                }
                other => Err(LogicError::UnsupportedFragment(format!(
                    "{} (persistence has no deterministic Büchi automaton)",
                    L::eventually(L::always(other))
                ))),
            },
            other => unsupported(&L::eventually(other)),
        },
        L::Until(a, b) if a.is_propositional() && b.is_propositional() => {
            out.push(Pattern::Until(*a, *b));
            Ok(())
        }
        other => unsupported(&other),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
struct Monitor {
    dead: bool,
    started: bool,
    /// Per reach/until pattern: satisfied yet.
    done: Vec<bool>,
    /// Index of the recurrence condition awaited next.
    counter: usize,
    /// A full round of recurrence conditions completed on the last letter.
    completed: bool,
}

struct Compiled {
    init: Vec<Vec<bool>>,
    safety: Vec<Vec<bool>>,
    /// `(hold, release)` tables; reach patterns hold on every letter.
    obligations: Vec<(Vec<bool>, Vec<bool>)>,
    recur: Vec<Vec<bool>>,
}

impl Compiled {
    fn dead(&self) -> Monitor {
        Monitor {
            dead: true,
            started: true,
            done: vec![true; self.obligations.len()],
            counter: 0,
            completed: false,
        }
    }

    fn start(&self) -> Monitor {
        Monitor {
            dead: false,
            started: false,
            done: vec![false; self.obligations.len()],
            counter: 0,
            completed: false,
        }
    }

    fn accepting(&self, m: &Monitor) -> bool {
        !m.dead && m.done.iter().all(|d| *d) && (self.recur.is_empty() || m.completed)
    }

    fn step(&self, m: &Monitor, l: usize) -> Monitor {
        if m.dead {
            return m.clone();
        }
        if !m.started && self.init.iter().any(|t| !t[l]) {
            return self.dead();
        }
        if self.safety.iter().any(|t| !t[l]) {
            return self.dead();
        }
        let mut next = m.clone();
        next.started = true;
        for (i, (hold, release)) in self.obligations.iter().enumerate() {
            if next.done[i] {
                continue;
            }
            if release[l] {
                next.done[i] = true;
            } else if !hold[l] {
                return self.dead();
            }
        }
        if !self.recur.is_empty() {
            while next.counter < self.recur.len() && self.recur[next.counter][l] {
                next.counter += 1;
            }
            next.completed = next.counter == self.recur.len();
            if next.completed {
                next.counter = 0;
            }
        }
        next
    }
}

/// Builds a minimal deterministic, complete Büchi automaton for a formula
/// in the supported fragment. Its alphabet ranges over the formula's atoms.
pub fn to_dba(f: &LtlFormula) -> Result<BuchiAutomaton, LogicError> {
    let atoms = f.atoms();
    if atoms.len() > MAX_ATOMS {
        return Err(LogicError::TooManyAtoms(atoms.len()));
    }
    let mut patterns = Vec::new();
    collect_patterns(nnf(f, false)?, &mut patterns)?;

    let letters = 1usize << atoms.len();
    let table = |p: &LtlFormula| -> Vec<bool> {
        (0..letters)
            .map(|l| p.eval_prop(&|name| atoms.iter().position(|a| a == name).is_some_and(|i| l & (1 << i) != 0)))
            .collect()
    };
    let mut compiled = Compiled {
        init: Vec::new(),
        safety: Vec::new(),
        obligations: Vec::new(),
        recur: Vec::new(),
    };
    for p in &patterns {
        match p {
            Pattern::Init(q) => compiled.init.push(table(q)),
            Pattern::Safety(q) => compiled.safety.push(table(q)),
            Pattern::Reach(q) => compiled.obligations.push((vec![true; letters], table(q))),
            Pattern::Until(a, b) => compiled.obligations.push((table(a), table(b))),
            Pattern::Recur(q) => compiled.recur.push(table(q)),
        }
    }

    let mut index: HashMap<Monitor, usize> = HashMap::new();
    let mut states = Vec::new();
    let mut delta: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();
    let start = compiled.start();
    index.insert(start.clone(), 0);
    states.push(start.clone());
    queue.push_back(0);
    while let Some(s) = queue.pop_front() {
        let mut row = Vec::with_capacity(letters);
        for l in 0..letters {
            let next = compiled.step(&states[s], l);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    index.insert(next.clone(), id);
                    states.push(next);
                    queue.push_back(id);
                    id
                }
            };
            row.push(id);
        }
        delta.push(row);
    }
    let accepting: Vec<bool> = states.iter().map(|m| compiled.accepting(m)).collect();
    Ok(minimize(atoms, &accepting, &delta))
}

/// Moore partition refinement, renumbered in breadth-first order from the
/// initial state (state 0 on input).
fn minimize(atoms: Vec<String>, accepting: &[bool], delta: &[Vec<usize>]) -> BuchiAutomaton {
    let n = accepting.len();
    let mut class: Vec<usize> = accepting.iter().map(|a| usize::from(*a)).collect();
    let mut count = 0;
    loop {
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let next: Vec<usize> = (0..n)
            .map(|s| {
                let sig = (class[s], delta[s].iter().map(|t| class[*t]).collect());
                let fresh = ids.len();
                *ids.entry(sig).or_insert(fresh)
            })
            .collect();
        let new_count = ids.len();
        class = next;
        if new_count == count {
            break;
        }
        count = new_count;
    }
    let mut order = vec![usize::MAX; count];
    let mut rep = Vec::new();
    let mut queue = VecDeque::from([0usize]);
    order[class[0]] = 0;
    rep.push(0);
    while let Some(s) = queue.pop_front() {
        for &t in &delta[s] {
            if order[class[t]] == usize::MAX {
                order[class[t]] = rep.len();
                rep.push(t);
                queue.push_back(t);
            }
        }
    }
    BuchiAutomaton {
        atoms,
        initial: 0,
        accepting: rep.iter().map(|s| accepting[*s]).collect(),
        delta: rep
            .iter()
            .map(|s| delta[*s].iter().map(|t| order[class[*t]]).collect())
            .collect(),
    }
}
