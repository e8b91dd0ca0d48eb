use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use pwabs::abstraction::*;
use pwabs::dynamics::{PwaMode, PwaModel};
use pwabs::geometry::{sample_uniform, Polytope};
use pwabs::identify::SuccessorMap;
use pwabs::logic::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn single_mode(dim: usize, a: &[f64], b: &[f64]) -> PwaModel {
    let domain = Polytope::boxed(&vec![0.0; dim], &vec![1.0; dim]).unwrap();
    PwaModel::new(
        vec![PwaMode {
            a: DMatrix::from_row_slice(dim, dim, a),
            b: DVector::from_column_slice(b),
            region: domain.clone(),
        }],
        domain,
        0.0,
    )
    .unwrap()
}

fn case_dba() -> BuchiAutomaton {
    to_dba(&parse_ltl("G(p1 & F p2)", &Atom::case_study()).unwrap()).unwrap()
}

/// Every run from `s` explored up to its first repeated state (or a
/// deadlock); lassos of at most 12 states cover all simple cycles of
/// graphs with at most 6 states.
fn lasso_fates(succ: &[Vec<usize>], accepting: &[bool], s: usize) -> (bool, bool) {
    fn walk(succ: &[Vec<usize>], acc: &[bool], path: &mut Vec<usize>, fates: &mut (bool, bool)) {
        let last = *path.last().unwrap();
        if succ[last].is_empty() {
            fates.1 = true;
            return;
        }
        for &t in &succ[last] {
            if let Some(pos) = path.iter().position(|p| *p == t) {
                if path[pos..].iter().any(|q| acc[*q]) {
                    fates.0 = true;
                } else {
                    fates.1 = true;
                }
            } else if path.len() < 12 {
                path.push(t);
                walk(succ, acc, path, fates);
                path.pop();
            }
        }
    }
    let mut fates = (false, false);
    walk(succ, accepting, &mut vec![s], &mut fates);
    fates
}

#[test]
fn classification_matches_lasso_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = rng.random_range(1..=6);
        let succ: Vec<Vec<usize>> = (0..n)
            .map(|_| (0..n).filter(|_| rng.random_bool(0.35)).collect())
            .collect();
        let acc: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        let p = ProductAutomaton::from_graph(succ.clone(), acc.clone()).unwrap();
        let c = classify_states(&p);
        for s in 0..n {
            let (some_acc, some_rej) = lasso_fates(&succ, &acc, s);
            let expect = match (some_acc, some_rej) {
                (false, _) => &c.bottom,
                (true, false) => &c.top,
                (true, true) => &c.undecided,
            };
            assert!(expect.contains(&s), "state {s} of {succ:?} / {acc:?}");
        }
        assert_eq!(c.top.len() + c.bottom.len() + c.undecided.len(), n);
    }
}

#[test]
fn contraction_quotient_matches_forward_samples() {
    let m = single_mode(2, &[0.5, 0.0, 0.0, 0.5], &[0.25, 0.25]);
    let ts = build_quotient(&m, &[], initial_partition(&m, &[], &[4, 4]).unwrap()).unwrap();
    assert_eq!(ts.sink(), None);
    for q in ts.cells() {
        let xs = sample_uniform(&ts.state(q).region, 100, q as u64).unwrap();
        for x in xs {
            let y = m.step_noiseless(&x).unwrap();
            let t = ts.locate_state(&y).unwrap();
            assert!(ts.has_transition(q, t), "{q} -> {t}");
        }
        // every successor lies within the image box [0.25, 0.75]^2
        for &t in ts.successors(q) {
            let bb = ts.state(t).region.bounding_box().unwrap().unwrap();
            assert!(bb.upper.iter().all(|u| *u > 0.25) && bb.lower.iter().all(|l| *l < 0.75));
        }
    }
}

#[test]
fn mode_one_strip_never_crosses() {
    let m = PwaModel::case_study(0.0);
    let atoms = Atom::case_study();
    let ts = build_quotient(&m, &atoms, initial_partition(&m, &atoms, &[10, 10]).unwrap()).unwrap();
    for q in ts.cells() {
        if ts.state(q).obs.modes == vec![0] {
            for &t in ts.successors(q) {
                assert_eq!(ts.state(t).obs.modes, vec![0], "strip cell {q} reaches {t}");
            }
        }
    }
}

#[test]
fn universal_automaton_product_is_isomorphic() {
    let m = PwaModel::case_study(0.0);
    let atoms = Atom::case_study();
    let ts = build_quotient(&m, &atoms, initial_partition(&m, &atoms, &[3, 3]).unwrap()).unwrap();
    let b = to_dba(&parse_ltl("true", &atoms).unwrap()).unwrap();
    let p = build_product(&ts, &b).unwrap();
    assert_eq!(p.len(), ts.len());
    for i in 0..p.len() {
        assert!(p.is_accepting(i));
        let (q, _) = p.pair(i);
        let targets: Vec<usize> = p.successors(i).iter().map(|j| p.pair(*j).0).collect();
        assert_eq!(targets, ts.successors(q));
    }
}

#[test]
fn tracking_loop_never_accepts() {
    let atoms = Atom::case_study();
    let region = pwabs::geometry::Region::from_polytope(Polytope::boxed(&[0.0, 0.0], &[0.2, 0.5]).unwrap());
    let ts = FiniteTS::new(
        Polytope::boxed(&[0.0, 0.0], &[1.0, 1.0]).unwrap(),
        atoms.iter().map(|a| a.name.clone()).collect(),
        vec![TsState {
            region,
            obs: Observation {
                modes: vec![0],
                atoms: vec![true, false],
            },
        }],
        vec![vec![0]],
        None,
    )
    .unwrap();
    let b = case_dba();
    let p = build_product(&ts, &b).unwrap();
    assert_eq!(p.len(), 1);
    assert!(!p.is_accepting(0));
    assert_eq!(p.successors(0), &[0]);
    assert_eq!(classify_states(&p).bottom, vec![0]);
    assert!(p.len() <= ts.len() * b.num_states());
}

#[test]
fn single_split_adds_one_state() {
    let m = single_mode(1, &[0.5], &[0.0]);
    let atoms = vec![Atom::new("p", vec![1.0], 0.25)];
    let b = to_dba(&parse_ltl("G F !p", &atoms).unwrap()).unwrap();
    let cfg = RefineConfig {
        max_passes: 1,
        eta: 1e-3,
        ..Default::default()
    };
    let abs = abstract_model(&m, &atoms, &b, &[1], &cfg).unwrap();
    assert_eq!(abs.ts.len(), 2);
    assert_eq!(abs.classification.undecided_ts_states(&abs.product).len(), 1);
    let (out, report) = refine_abstraction(&m, &atoms, &b, abs, &cfg).unwrap();
    assert_eq!(out.ts.len(), 3);
    assert_eq!(report.passes.len(), 2);
    assert!(out.classification.undecided.is_empty());
}

#[test]
fn case_study_refinement_is_sound_and_shrinks() {
    let m = PwaModel::case_study(0.0);
    let atoms = Atom::case_study();
    let b = case_dba();
    let cfg = RefineConfig {
        eta: 1e-4,
        ..Default::default()
    };
    let abs = abstract_model(&m, &atoms, &b, &[5, 5], &cfg).unwrap();
    let (abs, report) = refine_abstraction(&m, &atoms, &b, abs, &cfg).unwrap();
    for w in report.passes.windows(2) {
        let slack = 3.0 * (w[0].su_volume.stderr + w[1].su_volume.stderr);
        assert!(w[1].su_volume.value <= w[0].su_volume.value + slack);
    }
    let ts = &abs.ts;
    let starts = sample_uniform(&pwabs::geometry::Region::from_polytope(m.domain().clone()), 300, 5).unwrap();
    for x0 in starts {
        let mut x = x0;
        let mut q = ts.locate_state(&x).unwrap();
        for _ in 0..20 {
            x = m.step_noiseless(&x).unwrap();
            let t = ts.locate_state(&x).unwrap();
            assert!(ts.has_transition(q, t));
            q = t;
        }
    }
}

#[test]
fn successor_map_distances() {
    let m = PwaModel::case_study(0.0);
    let atoms = Atom::case_study();
    let ts = build_quotient(&m, &atoms, initial_partition(&m, &atoms, &[4, 4]).unwrap()).unwrap();
    let x = [0.1, 0.1];
    let q = ts.locate(&x).unwrap();
    let y = m.step_noiseless(&x).unwrap();
    assert_eq!(ts.successor_distance(q, &y), 0.0);
    assert!(ts.successor_distance(q, &[0.9, 0.9]) > 0.5);
}

#[test]
fn exports() {
    let m = PwaModel::case_study(0.0);
    let atoms = Atom::case_study();
    let ts = build_quotient(&m, &atoms, initial_partition(&m, &atoms, &[2, 2]).unwrap()).unwrap();
    let mut csv = Vec::new();
    ts.write_partition_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().count(), 1 + ts.cells().count());
    assert!(ts.to_dot().contains("->"));
    let back: FiniteTS = serde_json::from_str(&ts.to_json().unwrap()).unwrap();
    assert_eq!(back, ts);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn partition_covers_domain(gx in 1usize..5, gy in 1usize..5, seed in 0u64..1000) {
        let m = PwaModel::case_study(0.0);
        let atoms = Atom::case_study();
        let states = initial_partition(&m, &atoms, &[gx, gy]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let owners = states.iter().filter(|s| s.region.contains(&x)).count();
            prop_assert!(owners <= 1);
            let closed = states.iter().filter(|s| s.region.contains_closed(&x, 1e-9)).count();
            prop_assert!(closed >= 1);
        }
    }
}
