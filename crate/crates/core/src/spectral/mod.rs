//! Adiabatic Hamiltonians and spectral-gap profiles.

mod gap;
mod hamiltonian;
pub mod lanczos;

pub use gap::{
    gap_profile, spectral_gap, spectral_gap_with, GapProfile, GapSummary, DEFAULT_GAP_SAMPLES, DEGENERACY_TOL,
};
pub use hamiltonian::{build_hamiltonians, Amplitude, HamiltonianPair, Interpolated, MAX_GAP_QUBITS};
