use num_complex::Complex64;
use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::qubo::SpinModel;

/// Largest register handled by the matrix-free operators.
pub const MAX_GAP_QUBITS: usize = 16;

/// Scalar types the Hamiltonians can act on.
pub trait Amplitude: Copy + Send + Sync + Add<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
}

impl Amplitude for f64 {
    fn zero() -> Self {
        0.0
    }
}

impl Amplitude for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
}

/// Problem Hamiltonian (diagonal) and transverse-field driver `−Σ σₓ⁽ⁱ⁾`.
///
/// Basis index `z` reads qubit `i` from bit `i`; bit `1` is spin `+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianPair {
    num_qubits: usize,
    diag: Vec<f64>,
}

impl HamiltonianPair {
    pub fn from_diagonal(num_qubits: usize, diag: Vec<f64>) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::invalid("need at least one qubit"));
        }
        if num_qubits > MAX_GAP_QUBITS {
            return Err(Error::SizeCap {
                what: "qubit count",
                limit: MAX_GAP_QUBITS,
                got: num_qubits,
            });
        }
        if diag.len() != 1 << num_qubits {
            return Err(Error::DimensionMismatch {
                expected: 1 << num_qubits,
                got: diag.len(),
            });
        }
        if !diag.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("problem energies must be finite"));
        }
        Ok(Self { num_qubits, diag })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// Diagonal of the problem Hamiltonian.
    pub fn problem_diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn problem_bounds(&self) -> (f64, f64) {
        self.diag
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// `y = H_B x`.
    pub fn apply_driver<T: Amplitude>(&self, x: &[T], y: &mut [T]) {
        for (z, out) in y.iter_mut().enumerate() {
            let mut acc = T::zero();
            for i in 0..self.num_qubits {
                acc = acc + x[z ^ (1 << i)];
            }
            *out = acc * -1.0;
        }
    }

    /// The operator `u H_P + (1 − u) H_B`.
    pub fn at(&self, u: f64) -> Result<Interpolated<'_>> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::invalid(format!("interpolation parameter {u} outside [0, 1]")));
        }
        Ok(Interpolated { pair: self, u })
    }

    /// Eigenvalue bounds of `u H_P + (1 − u) H_B`.
    pub fn spectral_bounds(&self, u: f64) -> (f64, f64) {
        let (lo, hi) = self.problem_bounds();
        let m = self.num_qubits as f64;
        (u * lo - (1.0 - u) * m, u * hi + (1.0 - u) * m)
    }
}

/// `H_P[z]` is the spin energy of basis state `z`.
pub fn build_hamiltonians(model: &SpinModel) -> Result<HamiltonianPair> {
    let m = model.dim();
    if m > MAX_GAP_QUBITS {
        return Err(Error::SizeCap {
            what: "qubit count",
            limit: MAX_GAP_QUBITS,
            got: m,
        });
    }
    let diag = (0..1u64 << m).map(|z| model.energy_of_index(z)).collect();
    HamiltonianPair::from_diagonal(m, diag)
}

/// Matrix-free `u H_P + (1 − u) H_B`.
#[derive(Debug, Clone, Copy)]
pub struct Interpolated<'a> {
    pair: &'a HamiltonianPair,
    u: f64,
}

impl Interpolated<'_> {
    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn dim(&self) -> usize {
        self.pair.dim()
    }

    pub fn apply<T: Amplitude>(&self, x: &[T], y: &mut [T]) {
        let (u, drive) = (self.u, 1.0 - self.u);
        let m = self.pair.num_qubits;
        for (z, out) in y.iter_mut().enumerate() {
            let mut flip = T::zero();
            for i in 0..m {
                flip = flip + x[z ^ (1 << i)];
            }
            *out = x[z] * (u * self.pair.diag[z]) + flip * (-drive);
        }
    }
}
