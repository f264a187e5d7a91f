use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::AnnealSchedule;
use crate::error::{Error, Result};
use crate::spectral::{HamiltonianPair, Interpolated};

/// Default register cap for Schrödinger evolution.
pub const MAX_EVOLVE_QUBITS: usize = 12;

/// Raw norm drift beyond which the state is renormalized after a step.
pub const RENORM_THRESHOLD: f64 = 1e-10;

/// Pure state of `m` qubits; amplitude `z` belongs to basis index `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() < 2 || !amplitudes.len().is_power_of_two() {
            return Err(Error::invalid(format!(
                "state length {} is not a power of two of at least 2",
                amplitudes.len()
            )));
        }
        if !amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite()) {
            return Err(Error::invalid("amplitudes must be finite"));
        }
        Ok(Self { amplitudes })
    }

    /// `|+⟩^⊗m`, the ground state of the driver.
    pub fn uniform(num_qubits: usize) -> Self {
        let dim = 1usize << num_qubits;
        let a = Complex64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Self {
            amplitudes: vec![a; dim],
        }
    }

    pub fn basis(num_qubits: usize, z: usize) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if z >= dim {
            return Err(Error::invalid(format!(
                "basis index {z} out of range for {num_qubits} qubits"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[z] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes })
    }

    pub fn num_qubits(&self) -> usize {
        self.amplitudes.len().trailing_zeros() as usize
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|a_z|²`, normalized to sum to one.
    pub fn probabilities(&self) -> Vec<f64> {
        let p: Vec<f64> = self.amplitudes.iter().map(|a| a.norm_sqr()).collect();
        let total: f64 = p.iter().sum();
        p.into_iter().map(|v| v / total).collect()
    }

    fn renormalize(&mut self) {
        let nrm = self.norm();
        self.amplitudes.iter_mut().for_each(|a| *a /= nrm);
    }

    fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub max_qubits: usize,
    /// Largest Krylov space per step before the step is split in half.
    pub max_krylov: usize,
    /// Local truncation target for each Krylov exponential.
    pub krylov_tol: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_qubits: MAX_EVOLVE_QUBITS,
            max_krylov: 40,
            krylov_tol: 1e-12,
        }
    }
}

/// Final state plus the norm measured after every step, before any
/// renormalization.
#[derive(Debug, Clone)]
pub struct Evolution {
    pub state: QuantumState,
    pub norms: Vec<f64>,
}

fn check_size(pair: &HamiltonianPair, cap: usize) -> Result<()> {
    if pair.num_qubits() > cap {
        return Err(Error::SizeCap {
            what: "qubit count for evolution",
            limit: cap,
            got: pair.num_qubits(),
        });
    }
    Ok(())
}

fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn cnorm(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// `exp(−i T dt) e₁` for the real symmetric tridiagonal `T`.
fn small_propagator(alphas: &[f64], betas: &[f64], dt: f64) -> Vec<Complex64> {
    let k = alphas.len();
    let t = DMatrix::from_fn(k, k, |a, b| match a.abs_diff(b) {
        0 => alphas[a],
        1 => betas[a.min(b)],
        _ => 0.0,
    });
    let eig = SymmetricEigen::new(t);
    (0..k)
        .map(|r| {
            (0..k)
                .map(|j| {
                    let v = eig.eigenvectors[(r, j)] * eig.eigenvectors[(0, j)];
                    Complex64::from_polar(v, -eig.eigenvalues[j] * dt)
                })
                .sum()
        })
        .collect()
}

/// Attempts `ψ ← exp(−i H dt) ψ` in one Krylov space; `false` if the space
/// would exceed `max_k` before meeting the tolerance.
fn krylov_expm(op: &Interpolated<'_>, psi: &mut [Complex64], dt: f64, opts: &EvolveOptions) -> bool {
    let dim = psi.len();
    let nrm = cnorm(psi);
    if nrm == 0.0 {
        return true;
    }
    let max_k = opts.max_krylov.min(dim);
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(max_k);
    let mut alphas = Vec::with_capacity(max_k);
    let mut betas: Vec<f64> = Vec::with_capacity(max_k);
    let mut v: Vec<Complex64> = psi.iter().map(|a| a / nrm).collect();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut next_check = 5;

    for j in 0..max_k {
        op.apply(&v, &mut w);
        let alpha = cdot(&v, &w).re;
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi -= vi * alpha;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, pi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= pi * b;
            }
        }
        basis.push(v);
        for _ in 0..2 {
            for q in &basis {
                let c = cdot(q, &w);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= qi * c;
                }
            }
        }
        alphas.push(alpha);
        let beta = cnorm(&w);
        let invariant = beta <= 1e-14 * alphas.iter().fold(1.0f64, |m, a| m.max(a.abs()));
        if invariant || j >= next_check || j + 1 == dim || j + 1 == max_k {
            next_check = j + 3;
            let coeffs = small_propagator(&alphas, &betas, dt);
            let err = beta * coeffs[j].norm();
            if !(invariant || err <= opts.krylov_tol || j + 1 == dim) {
                betas.push(beta);
                v = w.iter().map(|x| x / beta).collect();
                continue;
            }
            psi.iter_mut().for_each(|a| *a = Complex64::new(0.0, 0.0));
            for (c, q) in coeffs.iter().zip(&basis) {
                for (a, qi) in psi.iter_mut().zip(q) {
                    *a += qi * (c * nrm);
                }
            }
            return true;
        }
        betas.push(beta);
        v = w.iter().map(|x| x / beta).collect();
    }
    false
}

fn propagate(op: &Interpolated<'_>, psi: &mut Vec<Complex64>, dt: f64, opts: &EvolveOptions, depth: u32) -> Result<()> {
    let saved = psi.clone();
    if krylov_expm(op, psi, dt, opts) {
        return Ok(());
    }
    if depth >= 20 {
        return Err(Error::invalid(
            "Krylov propagator failed to converge even after step splitting",
        ));
    }
    *psi = saved;
    propagate(op, psi, dt / 2.0, opts, depth + 1)?;
    propagate(op, psi, dt / 2.0, opts, depth + 1)
}

/// Schrödinger evolution from `|+⟩^⊗m` under `H(u(t))`, one frozen
/// midpoint propagator per step.
pub fn evolve(pair: &HamiltonianPair, sched: &AnnealSchedule) -> Result<QuantumState> {
    Ok(evolve_with(pair, sched, &EvolveOptions::default())?.state)
}

pub fn evolve_with(pair: &HamiltonianPair, sched: &AnnealSchedule, opts: &EvolveOptions) -> Result<Evolution> {
    check_size(pair, opts.max_qubits)?;
    let steps = sched.steps();
    let dt = sched.tau() / steps as f64;
    let mut state = QuantumState::uniform(pair.num_qubits());
    let mut norms = Vec::with_capacity(steps);
    for k in 0..steps {
        let u = sched.u_at((k as f64 + 0.5) / steps as f64);
        let op = pair.at(u)?;
        // The same frozen exponential, cut into pieces a modest Krylov space
        // resolves without trial and error.
        let (lo, hi) = pair.spectral_bounds(u);
        let pieces = ((hi - lo) * dt / 20.0).ceil().max(1.0) as usize;
        for _ in 0..pieces {
            propagate(&op, &mut state.amplitudes, dt / pieces as f64, opts, 0)?;
        }
        if !state.is_finite() {
            return Err(Error::NonFinite { step: k, u });
        }
        let nrm = state.norm();
        norms.push(nrm);
        if (nrm - 1.0).abs() > RENORM_THRESHOLD {
            state.renormalize();
        }
    }
    Ok(Evolution { state, norms })
}

/// Piecewise-constant evolution with `slices` segments, each advanced by the
/// symmetric splitting `e^{−iAΔt/2} e^{−iBΔt} e^{−iAΔt/2}` where
/// `A = (1 − u) H_B` and `B = u H_P`.
pub fn evolve_trotter(pair: &HamiltonianPair, sched: &AnnealSchedule, slices: usize) -> Result<QuantumState> {
    if slices == 0 {
        return Err(Error::invalid("need at least one Trotter slice"));
    }
    check_size(pair, MAX_EVOLVE_QUBITS)?;
    let m = pair.num_qubits();
    let dt = sched.tau() / slices as f64;
    let diag = pair.problem_diagonal();
    let mut state = QuantumState::uniform(m);
    for l in 0..slices {
        let u = sched.u_at((l as f64 + 0.5) / slices as f64);
        // e^{iθσₓ} on every qubit, θ = (1 − u)Δt/2.
        let theta = (1.0 - u) * dt / 2.0;
        let (c, s) = (theta.cos(), Complex64::new(0.0, theta.sin()));
        let driver = |amps: &mut [Complex64]| {
            for q in 0..m {
                let bit = 1usize << q;
                for z in 0..amps.len() {
                    if z & bit == 0 {
                        let (a, b) = (amps[z], amps[z | bit]);
                        amps[z] = a * c + b * s;
                        amps[z | bit] = b * c + a * s;
                    }
                }
            }
        };
        driver(&mut state.amplitudes);
        for (a, &e) in state.amplitudes.iter_mut().zip(diag) {
            *a *= Complex64::from_polar(1.0, -u * e * dt);
        }
        driver(&mut state.amplitudes);
        if !state.is_finite() {
            return Err(Error::NonFinite { step: l, u });
        }
    }
    if (state.norm() - 1.0).abs() > RENORM_THRESHOLD {
        state.renormalize();
    }
    Ok(state)
}
