//! Schrödinger and Trotterized evolution under the interpolated Hamiltonian,
//! projective measurement, and a classical simulated-annealing sampler.

mod evolve;
mod sa;
mod samples;
mod schedule;

pub use evolve::{
    evolve, evolve_trotter, evolve_with, Evolution, EvolveOptions, QuantumState, MAX_EVOLVE_QUBITS, RENORM_THRESHOLD,
};
pub use sa::{simulated_annealing, TemperatureSchedule};
pub use samples::{measure, success_probability, SampleEntry, SampleMeta, SampleSet, SuccessProbability};
pub use schedule::AnnealSchedule;
