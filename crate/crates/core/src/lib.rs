//! Simulation and numerical analysis of a critical exclusion + Glauber
//! particle system on the discrete torus and of its quartic fluctuation law.

pub mod birthdeath;
pub mod exact;
pub mod field;
pub mod harness;
pub mod lattice;
pub mod limitlaw;
pub mod numerics;
pub mod potentials;
pub mod streams;

pub use potentials::{ModelError, ModelParams};
