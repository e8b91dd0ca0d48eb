use proptest::prelude::*;
use pwabs::abstraction::{FiniteTS, Observation, TsState};
use pwabs::geometry::{Polytope, Region};
use pwabs::verify::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Unit interval shifted by `0.05 * k`; shifts between palette entries are
/// exact multiples of 0.05.
fn interval(k: usize) -> Region {
    let lo = 0.05 * k as f64;
    Region::from_polytope(Polytope::boxed(&[lo], &[lo + 1.0]).unwrap())
}

fn line_ts(regions: Vec<Region>, succ: Vec<Vec<usize>>) -> FiniteTS {
    let domain = Polytope::boxed(&[-1.0], &[10.0]).unwrap();
    let states = regions
        .into_iter()
        .map(|region| TsState {
            region,
            obs: Observation {
                modes: vec![0],
                atoms: vec![],
            },
        })
        .collect();
    FiniteTS::new(domain, vec![], states, succ, None).unwrap()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<Vec<usize>> {
    (0..n)
        .map(|_| (0..n).filter(|_| rng.random::<f64>() < density).collect())
        .collect()
}

#[test]
fn reach_set_basics() {
    let t = line_ts(vec![interval(0), interval(1), interval(2)], vec![vec![1], vec![2], vec![]]);
    assert_eq!(reach_set(&t, &[0]), vec![0, 1, 2]);
    assert_eq!(reach_set(&t, &[1]), vec![1, 2]);
    assert_eq!(reach_set(&t, &[0, 1, 2]), vec![0, 1, 2]);
}

#[test]
fn reach_set_matches_matrix_powers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..30 {
        let n = 20;
        let succ = random_graph(&mut rng, n, 0.08);
        let t = line_ts(vec![interval(0); n], succ.clone());
        let from: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.15).collect();
        // reachable-within-k indicator, iterated n times: (I + A)^n
        let mut reach = vec![false; n];
        for &f in &from {
            reach[f] = true;
        }
        for _ in 0..n {
            let mut next = reach.clone();
            for i in 0..n {
                if reach[i] {
                    for &j in &succ[i] {
                        next[j] = true;
                    }
                }
            }
            reach = next;
        }
        let expect: Vec<usize> = (0..n).filter(|i| reach[*i]).collect();
        assert_eq!(reach_set(&t, &from), expect);
    }
}

#[test]
fn reachability_metric_examples() {
    let a = line_ts(vec![interval(0)], vec![vec![]]);
    let b = line_ts(
        vec![Region::from_polytope(Polytope::boxed(&[2.0], &[3.0]).unwrap())],
        vec![vec![]],
    );
    let d = reachability_metric(&a, &b, 200, 1).unwrap();
    assert!((d - 2.0).abs() < 0.05, "{d}");
    assert_eq!(reachability_metric(&a, &b, 200, 1).unwrap(), reachability_metric(&b, &a, 200, 1).unwrap());
    assert_eq!(reachability_metric(&a, &a, 200, 1).unwrap(), 0.0);
    let empty = line_ts(vec![Region::empty(1)], vec![vec![]]);
    assert_eq!(reachability_metric(&a, &empty, 10, 1), Err(VerifyError::EmptyReach));
}

/// Exhaustive search: the union of every candidate subset that satisfies
/// the successor condition is the greatest simulation relation.
fn brute_force(t1: &FiniteTS, t2: &FiniteTS, candidates: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let m = candidates.len();
    assert!(m <= 20, "instance too large for exhaustive search");
    let mut union = vec![false; m];
    for mask in 0u32..(1 << m) {
        let member = |a: usize, b: usize| {
            candidates
                .iter()
                .enumerate()
                .any(|(k, p)| mask & (1 << k) != 0 && *p == (a, b))
        };
        let valid = (0..m).filter(|k| mask & (1 << k) != 0).all(|k| {
            let (i, j) = candidates[k];
            t1.successors(i)
                .iter()
                .all(|&a| t2.successors(j).iter().any(|&b| member(a, b)))
        });
        if valid {
            for k in 0..m {
                if mask & (1 << k) != 0 {
                    union[k] = true;
                }
            }
        }
    }
    let mut out: Vec<_> = (0..m).filter(|k| union[*k]).map(|k| candidates[k]).collect();
    out.sort();
    out
}

/// Small systems over a palette of far-apart intervals, so observation
/// distances are either exactly 0 or at least 2.
fn palette_instance(rng: &mut ChaCha8Rng) -> (FiniteTS, FiniteTS) {
    let far = |k: usize| Region::from_polytope(Polytope::boxed(&[3.0 * k as f64], &[3.0 * k as f64 + 1.0]).unwrap());
    let make = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(1..=5);
        let regions = (0..n).map(|_| far(rng.random_range(0..3))).collect();
        let density = rng.random_range(0.2..0.6);
        line_ts(regions, random_graph(rng, n, density))
    };
    let t1 = make(rng);
    let t2 = make(rng);
    (t1, t2)
}

#[test]
fn checker_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = SimulationOptions::default();
    let mut holding = 0;
    for _ in 0..50 {
        let (t1, t2) = palette_instance(&mut rng);
        let cert = check_sigma_simulation(&t1, &t2, 0.5, &opts).unwrap();
        let candidates: Vec<(usize, usize)> = (0..t1.len())
            .flat_map(|i| (0..t2.len()).map(move |j| (i, j)))
            .filter(|(i, j)| t1.state(*i).region == t2.state(*j).region)
            .collect();
        let expect = brute_force(&t1, &t2, &candidates);
        assert_eq!(cert.witness_relation, expect);
        let covered = (0..t1.len()).all(|i| expect.iter().any(|(a, _)| *a == i));
        assert_eq!(cert.holds, covered);
        holding += cert.holds as usize;
        for t in [&t1, &t2] {
            let refl = check_sigma_simulation(t, t, 0.0, &opts).unwrap();
            assert!(refl.holds);
            assert!((0..t.len()).all(|i| refl.witness_relation.contains(&(i, i))));
        }
    }
    assert!(holding > 0 && holding < 50, "{holding}");
}

#[test]
fn sub_automaton_is_simulated() {
    let regions: Vec<Region> = (0..4).map(interval).collect();
    let full = line_ts(regions.clone(), vec![vec![1, 2], vec![2, 3], vec![0, 3], vec![0]]);
    let sub = line_ts(regions, vec![vec![1], vec![2], vec![3], vec![0]]);
    let opts = SimulationOptions::default();
    assert!(check_sigma_simulation(&sub, &full, 0.0, &opts).unwrap().holds);
    assert!(!check_sigma_simulation(&full, &sub, 0.0, &opts).unwrap().holds);
}

#[test]
fn scope_and_certificate_fields() {
    // state 1 has no partner in t2; state 0 does
    let t1 = line_ts(vec![interval(0), interval(10)], vec![vec![0], vec![]]);
    let t2 = line_ts(vec![interval(0)], vec![vec![0]]);
    let mut opts = SimulationOptions::default();
    assert!(!check_sigma_simulation(&t1, &t2, 0.1, &opts).unwrap().holds);
    opts.scope = Scope::Initial(vec![0]);
    opts.bound = Some((0.0, 1.0, 0.0));
    let cert = check_sigma_simulation(&t1, &t2, 1.0, &opts).unwrap();
    assert!(cert.holds);
    let expect = 1.0 - statrs::function::erf::erf(1.0 / 2f64.sqrt());
    assert!((cert.delta_bound.unwrap() - expect).abs() < 1e-12);
    assert_eq!(cert.inputs_digest.len(), 64);
    let again = check_sigma_simulation(&t1, &t2, 1.0, &opts).unwrap();
    assert_eq!(again, cert);
    let other = check_sigma_simulation(&t2, &t1, 1.0, &SimulationOptions::default()).unwrap();
    assert_ne!(other.inputs_digest, cert.inputs_digest);
    opts.scope = Scope::Initial(vec![5]);
    assert!(check_sigma_simulation(&t1, &t2, 1.0, &opts).is_err());
}

#[test]
fn sinks_relate_only_to_sinks() {
    let domain = Polytope::boxed(&[-1.0], &[10.0]).unwrap();
    let st = |region: Region| TsState {
        region,
        obs: Observation {
            modes: vec![],
            atoms: vec![],
        },
    };
    let with_sink = FiniteTS::new(
        domain.clone(),
        vec![],
        vec![st(interval(0)), st(Region::empty(1))],
        vec![vec![1], vec![]],
        Some(1),
    )
    .unwrap();
    let without = line_ts(vec![interval(0)], vec![vec![0]]);
    let opts = SimulationOptions::default();
    assert!(check_sigma_simulation(&with_sink, &with_sink, 0.0, &opts).unwrap().holds);
    let cert = check_sigma_simulation(&with_sink, &without, 5.0, &opts).unwrap();
    assert!(!cert.holds);
    assert!(!check_sigma_simulation(&without, &with_sink, 5.0, &opts).unwrap().holds);
}

/// Random system over shifted unit intervals and a perturbed copy with
/// extra transitions and shifted regions.
fn shifted_copy(rng: &mut ChaCha8Rng, base: &[usize], succ: &[Vec<usize>]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let shifts = base.iter().map(|k| k + rng.random_range(0..2)).collect();
    let n = succ.len();
    let more = succ
        .iter()
        .map(|s| {
            let mut s = s.clone();
            if rng.random::<f64>() < 0.3 {
                s.push(rng.random_range(0..n));
            }
            s
        })
        .collect();
    (shifts, more)
}

fn build(ks: &[usize], succ: Vec<Vec<usize>>) -> FiniteTS {
    line_ts(ks.iter().map(|k| interval(*k)).collect(), succ)
}

#[test]
fn transitivity_surrogate() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let opts = SimulationOptions::default();
    let mut composed = 0;
    for _ in 0..40 {
        let n = rng.random_range(2..=5);
        let ka: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let sa = random_graph(&mut rng, n, 0.4);
        let (kb, sb) = shifted_copy(&mut rng, &ka, &sa);
        let (kc, sc) = shifted_copy(&mut rng, &kb, &sb);
        let (ta, tb, tc) = (build(&ka, sa), build(&kb, sb), build(&kc, sc));
        for (eta, eps) in [(0.05, 0.05), (0.05, 0.1), (0.1, 0.05)] {
            let ab = check_sigma_simulation(&ta, &tb, eta, &opts).unwrap().holds;
            let bc = check_sigma_simulation(&tb, &tc, eps, &opts).unwrap().holds;
            if ab && bc {
                composed += 1;
                assert!(check_sigma_simulation(&ta, &tc, eta + eps + 1e-12, &opts).unwrap().holds);
            }
        }
    }
    assert!(composed > 10, "{composed}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monotone_and_sound(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n1 = rng.random_range(1..=5);
        let n2 = rng.random_range(1..=5);
        let k1: Vec<usize> = (0..n1).map(|_| rng.random_range(0..6)).collect();
        let k2: Vec<usize> = (0..n2).map(|_| rng.random_range(0..6)).collect();
        let t1 = build(&k1, random_graph(&mut rng, n1, 0.4));
        let t2 = build(&k2, random_graph(&mut rng, n2, 0.5));
        let opts = SimulationOptions { seed, ..Default::default() };
        let dist = observation_distances(&t1, &t2, 1.0, opts.samples, opts.seed).unwrap();
        let mut prev = false;
        for j in 0..=20 {
            let sigma = 0.0125 * j as f64;
            let cert = check_with_distances(&t1, &t2, &dist, sigma, &opts).unwrap();
            prop_assert!(!prev || cert.holds);
            prev = cert.holds;
            prop_assert_eq!(&cert, &check_sigma_simulation(&t1, &t2, sigma, &opts).unwrap());
            for &(a, b) in &cert.witness_relation {
                prop_assert!(dist.values[a][b] <= sigma);
                for &a2 in t1.successors(a) {
                    prop_assert!(t2.successors(b).iter().any(|b2| cert.witness_relation.contains(&(a2, *b2))));
                }
            }
        }
    }
}

/// Composite Simpson rule for the Gaussian mass outside `[-w, w]`.
fn quadrature_delta(w: f64, v: f64) -> f64 {
    let n = 20_000;
    let h = 2.0 * w / n as f64;
    let f = |u: f64| (-u * u / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
    let mut acc = f(-w) + f(w);
    for i in 1..n {
        let u = -w + i as f64 * h;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(u);
    }
    1.0 - acc * h / 3.0
}

#[test]
fn confidence_bound_matches_quadrature() {
    let d = confidence_bound(1.5, 0.5, 0.6, 0.4, VarianceConvention::Verbatim).unwrap();
    assert!((d - quadrature_delta(1.0, 1.0)).abs() < 1e-9);
    assert!((d - 0.31731050786291415).abs() < 1e-9);
    let sq = confidence_bound(0.4, 0.1, 0.1, 0.2, VarianceConvention::Squared).unwrap();
    assert!((sq - quadrature_delta(0.3, 0.05)).abs() < 1e-9);
}

#[test]
fn confidence_bound_monotone_on_grid() {
    let ws: Vec<f64> = (1..=20).map(|i| 0.05 * i as f64).collect();
    let vs: Vec<f64> = (1..=20).map(|i| 0.02 * i as f64).collect();
    let delta = |w: f64, v: f64| confidence_bound(0.1 + w, 0.1, v * 0.75, v * 0.25, VarianceConvention::Verbatim).unwrap();
    for &v in &vs {
        for pair in ws.windows(2) {
            assert!(delta(pair[1], v) < delta(pair[0], v));
        }
    }
    for &w in &ws {
        for pair in vs.windows(2) {
            assert!(delta(w, pair[1]) > delta(w, pair[0]));
        }
    }
}
