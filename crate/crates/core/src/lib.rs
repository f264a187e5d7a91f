//! Quadratic assignment problems with permutation-matrix constraints,
//! rewritten as unconstrained binary quadratic models and studied through
//! exact enumeration, spectral gaps of the adiabatic Hamiltonian, simulated
//! Schrödinger evolution and classical simulated annealing.

pub mod anneal;
pub mod bench;
pub mod error;
mod provenance;
pub mod qap;
pub mod qubo;
pub mod spectral;

pub use error::{Error, Result};
pub use provenance::{sha256_hex, Provenance};
