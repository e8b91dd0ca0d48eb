//! Finite abstractions of PWA models: grid partition, existential quotient,
//! product with a Büchi automaton, classification of product states and
//! predecessor-splitting refinement.

mod export;
mod product;
mod refine;
mod ts;

pub use product::{build_product, classify_states, Classification, ProductAutomaton};
pub use refine::{abstract_model, refine_abstraction, Abstraction, PassStats, RefineConfig, RefineReport};
pub use ts::{build_quotient, initial_partition, FiniteTS, Observation, TsState};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::logic::LogicError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AbstractionError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("automaton atom '{0}' is not observed by the transition system")]
    UnknownAtom(String),
    #[error("state {0} has an undecided atom")]
    MixedState(usize),
    #[error("malformed transition system: {0}")]
    Malformed(String),
    #[error("export failed: {0}")]
    Export(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
