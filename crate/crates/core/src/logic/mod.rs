//! LTL over linear-predicate atoms and deterministic Büchi automata for a
//! fragment of it.

mod atoms;
mod dba;
mod formula;
mod parser;

pub use atoms::{eval_atoms, Atom, Truth};
pub use dba::{to_dba, BuchiAutomaton, Letter};
pub use formula::LtlFormula;
pub use parser::parse_ltl;

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("syntax error at column {column}: {message}")]
    Syntax { column: usize, message: String },
    #[error("undeclared atom '{0}'")]
    UndeclaredAtom(String),
    #[error("formula outside the supported fragment: {0}")]
    UnsupportedFragment(String),
    #[error("too many atoms ({0}); at most 16 are supported")]
    TooManyAtoms(usize),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
