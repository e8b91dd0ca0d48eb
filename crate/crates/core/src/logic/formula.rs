use std::fmt;

/// LTL syntax tree. `Atom` refers to a declared atom by name.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LtlFormula {
    True,
    False,
    Atom(String),
    Not(Box<LtlFormula>),
    And(Box<LtlFormula>, Box<LtlFormula>),
    Or(Box<LtlFormula>, Box<LtlFormula>),
    Next(Box<LtlFormula>),
    Until(Box<LtlFormula>, Box<LtlFormula>),
    Eventually(Box<LtlFormula>),
    Always(Box<LtlFormula>),
}

use LtlFormula::*;

impl LtlFormula {
    pub fn atom(name: &str) -> Self {
        Atom(name.to_string())
    }

    pub fn not(f: LtlFormula) -> Self {
        Not(Box::new(f))
    }

    pub fn and(a: LtlFormula, b: LtlFormula) -> Self {
        And(Box::new(a), Box::new(b))
    }

    pub fn or(a: LtlFormula, b: LtlFormula) -> Self {
        Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: LtlFormula) -> Self {
        Next(Box::new(f))
    }

    pub fn until(a: LtlFormula, b: LtlFormula) -> Self {
        Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: LtlFormula) -> Self {
        Eventually(Box::new(f))
    }

    pub fn always(f: LtlFormula) -> Self {
        Always(Box::new(f))
    }

    /// No temporal operator anywhere in the tree.
    pub fn is_propositional(&self) -> bool {
        match self {
            True | False | Atom(_) => true,
            Not(f) => f.is_propositional(),
            And(a, b) | Or(a, b) => a.is_propositional() && b.is_propositional(),
            Next(_) | Until(..) | Eventually(_) | Always(_) => false,
        }
    }

    /// Atom names in order of first appearance.
    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut Vec<String>) {
        match self {
            True | False => {}
            Atom(n) => {
                if !out.contains(n) {
                    out.push(n.clone());
                }
            }
            Not(f) | Next(f) | Eventually(f) | Always(f) => f.collect_atoms(out),
            And(a, b) | Or(a, b) | Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Evaluates a propositional formula under `value(atom)`.
    pub fn eval_prop(&self, value: &dyn Fn(&str) -> bool) -> bool {
        match self {
            True => true,
            False => false,
            Atom(n) => value(n),
            Not(f) => !f.eval_prop(value),
            And(a, b) => a.eval_prop(value) && b.eval_prop(value),
            Or(a, b) => a.eval_prop(value) || b.eval_prop(value),
            _ => panic!("eval_prop on temporal formula {self}"),
        }
    }
}

impl fmt::Display for LtlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            True => write!(f, "true"),
            False => write!(f, "false"),
            Atom(n) => write!(f, "{n}"),
            Not(a) => write!(f, "!{a}"),
            And(a, b) => write!(f, "({a} & {b})"),
            Or(a, b) => write!(f, "({a} | {b})"),
            Next(a) => write!(f, "X {a}"),
            Until(a, b) => write!(f, "({a} U {b})"),
            Eventually(a) => write!(f, "F {a}"),
            Always(a) => write!(f, "G {a}"),
        }
    }
}
