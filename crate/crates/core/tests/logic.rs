use proptest::prelude::*;
use pwabs::geometry::{Polytope, Region};
use pwabs::logic::*;

/// Ultimately periodic word: positions `0..u+v`, the last one loops to `u`.
struct Lasso {
    letters: Vec<u32>,
    loop_start: usize,
}

impl Lasso {
    fn next(&self, i: usize) -> usize {
        if i + 1 < self.letters.len() {
            i + 1
        } else {
            self.loop_start
        }
    }
}

/// Direct LTL semantics on a lasso by fixpoint iteration per subformula.
/// Atom `a` is bit 0 and atom `b` is bit 1.
fn holds(f: &LtlFormula, w: &Lasso) -> Vec<bool> {
    let n = w.letters.len();
    match f {
        LtlFormula::True => vec![true; n],
        LtlFormula::False => vec![false; n],
        LtlFormula::Atom(name) => {
            let bit = if name == "a" { 1 } else { 2 };
            w.letters.iter().map(|l| l & bit != 0).collect()
        }
        LtlFormula::Not(g) => holds(g, w).into_iter().map(|v| !v).collect(),
        LtlFormula::And(a, b) => holds(a, w).iter().zip(holds(b, w)).map(|(x, y)| *x && y).collect(),
        LtlFormula::Or(a, b) => holds(a, w).iter().zip(holds(b, w)).map(|(x, y)| *x || y).collect(),
        LtlFormula::Next(g) => {
            let s = holds(g, w);
            (0..n).map(|i| s[w.next(i)]).collect()
        }
        LtlFormula::Until(a, b) => until(&holds(a, w), &holds(b, w), w),
        LtlFormula::Eventually(g) => until(&vec![true; n], &holds(g, w), w),
        LtlFormula::Always(g) => {
            let s = holds(g, w);
            let mut r = vec![true; n];
            for _ in 0..=n {
                r = (0..n).map(|i| s[i] && r[w.next(i)]).collect();
            }
            r
        }
    }
}

fn until(a: &[bool], b: &[bool], w: &Lasso) -> Vec<bool> {
    let n = a.len();
    let mut r = vec![false; n];
    for _ in 0..=n {
        r = (0..n).map(|i| b[i] || (a[i] && r[w.next(i)])).collect();
    }
    r
}

fn words(max_len: usize, letters: u32) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for l in 0..letters {
                let mut v: Vec<u32> = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn declared() -> Vec<Atom> {
    vec![Atom::new("a", vec![1.0, 0.0], 0.5), Atom::new("b", vec![0.0, 1.0], 0.5)]
}

/// Checks the automaton against the oracle on every lasso with
/// `|u|, |v| <= 4` over two atoms.
fn assert_oracle_agrees(text: &str) {
    let f = parse_ltl(text, &declared()).unwrap();
    let b = to_dba(&f).unwrap();
    let to_letter = |l: u32| b.letter(&|name| if name == "a" { l & 1 != 0 } else { l & 2 != 0 });
    let all = words(4, 4);
    for u in &all {
        for v in all.iter().filter(|v| !v.is_empty()) {
            let lasso = Lasso {
                letters: u.iter().chain(v).copied().collect(),
                loop_start: u.len(),
            };
            let expect = holds(&f, &lasso)[0];
            let pu: Vec<u32> = u.iter().map(|l| to_letter(*l)).collect();
            let pv: Vec<u32> = v.iter().map(|l| to_letter(*l)).collect();
            assert_eq!(b.accepts_lasso(&pu, &pv), expect, "{text} on {u:?}({v:?})^w");
        }
    }
}

#[test]
fn oracle_sanity() {
    let f = parse_ltl("G(a & F b)", &declared()).unwrap();
    let w = Lasso {
        letters: vec![1, 3],
        loop_start: 0,
    };
    assert!(holds(&f, &w)[0]);
    let w = Lasso {
        letters: vec![3, 1],
        loop_start: 1,
    };
    assert!(!holds(&f, &w)[0]);
}

#[test]
fn case_study_formula_matches_oracle() {
    assert_oracle_agrees("G(a & F b)");
    let b = to_dba(&parse_ltl("G(a & F b)", &declared()).unwrap()).unwrap();
    assert_eq!(b.num_states(), 3);
}

#[test]
fn fragment_patterns_match_oracle() {
    for text in [
        "a",
        "!a | b",
        "G a",
        "G !b",
        "F a",
        "F (a & b)",
        "G F a",
        "F G F b",
        "a U b",
        "!a U (a & b)",
        "G a & F b",
        "G F a & G F b",
        "G (F a & F b)",
        "a & G (b | a) & F !a",
        "a U b & G F !b",
        "G(a & F b) & b",
        "true",
        "false",
        "G F true",
        "[] <> a & <> b",
    ] {
        assert_oracle_agrees(text);
    }
}

#[test]
fn outside_fragment_is_reported() {
    let atoms = vec![
        Atom::new("p1", vec![1.0, 0.0], 0.3),
        Atom::new("p2", vec![0.0, -1.0], -0.6),
        Atom::new("p3", vec![1.0, 1.0], 1.0),
    ];
    let f = parse_ltl("p1 U F p3", &atoms).unwrap();
    assert!(matches!(to_dba(&f), Err(LogicError::UnsupportedFragment(_))));
}

#[test]
fn parse_errors() {
    let atoms = Atom::case_study();
    assert!(matches!(
        parse_ltl("G(p1 &", &atoms),
        Err(LogicError::Syntax { column: 7, .. })
    ));
    assert!(matches!(parse_ltl("G(p1 & q)", &atoms), Err(LogicError::UndeclaredAtom(_))));
    assert!(matches!(parse_ltl("p1 $ p2", &atoms), Err(LogicError::Syntax { column: 4, .. })));
}

#[test]
fn atom_truth_on_strips() {
    let p1 = &Atom::case_study()[..1];
    let strip = |lo: f64, hi: f64| Region::from_polytope(Polytope::boxed(&[lo, 0.0], &[hi, 1.0]).unwrap());
    assert_eq!(eval_atoms(&strip(0.0, 0.2), p1).unwrap(), vec![Truth::True]);
    assert_eq!(eval_atoms(&strip(0.4, 1.0), p1).unwrap(), vec![Truth::False]);
    assert_eq!(eval_atoms(&strip(0.2, 0.4), p1).unwrap(), vec![Truth::Mixed]);
}

fn prop_formula() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![Just("a".to_string()), Just("b".to_string()), Just("true".to_string())];
    leaf.prop_recursive(2, 6, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|p| format!("!({p})")),
            (inner.clone(), inner.clone()).prop_map(|(p, q)| format!("({p} & {q})")),
            (inner.clone(), inner).prop_map(|(p, q)| format!("({p} | {q})")),
        ]
    })
}

fn fragment_formula() -> impl Strategy<Value = String> {
    let pattern = (0..5usize, prop_formula(), prop_formula()).prop_map(|(kind, p, q)| match kind {
        0 => p,
        1 => format!("G {p}"),
        2 => format!("F {p}"),
        3 => format!("G F {p}"),
        _ => format!("({p} U {q})"),
    });
    prop::collection::vec(pattern, 1..4).prop_map(|ps| ps.join(" & "))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_fragment_formulas_match_oracle(text in fragment_formula()) {
        assert_oracle_agrees(&text);
    }
}
