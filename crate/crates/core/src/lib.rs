//! Data-driven abstraction of piecewise-affine systems: identification from
//! samples, LTL-guided finite abstraction, active sampling and
//! approximate-simulation certificates.

pub mod abstraction;
pub mod dynamics;
pub mod geometry;
pub mod harness;
pub mod identify;
pub mod logic;
pub mod sample;
pub mod seeds;
mod serde_la;
pub mod verify;
