use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::lanczos::{lowest_two, LanczosOptions};
use super::{build_hamiltonians, HamiltonianPair};
use crate::error::{Error, Result};
use crate::qubo::{to_spin, Formulation, QuboModel};

pub const DEFAULT_GAP_SAMPLES: usize = 64;

/// Gaps below this are treated as an exact degeneracy.
pub const DEGENERACY_TOL: f64 = 1e-10;

/// Two lowest eigenvalues of `H(u)` on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pub ts: Vec<f64>,
    pub e0: Vec<f64>,
    pub e1: Vec<f64>,
    pub min_gap: f64,
    pub argmin_t: f64,
}

impl GapProfile {
    pub fn gaps(&self) -> Vec<f64> {
        self.e0.iter().zip(&self.e1).map(|(a, b)| clamp_gap(b - a)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("u,e0,e1,gap\n");
        for (k, gap) in self.gaps().into_iter().enumerate() {
            let _ = writeln!(out, "{:?},{:?},{:?},{:?}", self.ts[k], self.e0[k], self.e1[k], gap);
        }
        out
    }

    pub fn summary(&self, formulation: Option<Formulation>, scale: Option<f64>) -> GapSummary {
        GapSummary {
            min_gap: self.min_gap,
            argmin_t: self.argmin_t,
            formulation,
            scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapSummary {
    pub min_gap: f64,
    pub argmin_t: f64,
    pub formulation: Option<Formulation>,
    pub scale: Option<f64>,
}

fn clamp_gap(g: f64) -> f64 {
    if g < DEGENERACY_TOL {
        0.0
    } else {
        g
    }
}

pub fn spectral_gap(pair: &HamiltonianPair, num_samples: usize) -> Result<GapProfile> {
    spectral_gap_with(pair, num_samples, &LanczosOptions::default())
}

pub fn spectral_gap_with(pair: &HamiltonianPair, num_samples: usize, opts: &LanczosOptions) -> Result<GapProfile> {
    if num_samples < 2 {
        return Err(Error::invalid("a gap profile needs at least two samples"));
    }
    let ts: Vec<f64> = (0..num_samples).map(|k| k as f64 / (num_samples - 1) as f64).collect();
    let levels = ts
        .par_iter()
        .map(|&u| lowest_two(&pair.at(u)?, opts))
        .collect::<Result<Vec<_>>>()?;
    let (e0, e1): (Vec<f64>, Vec<f64>) = levels.into_iter().unzip();

    let mut min_gap = f64::INFINITY;
    let mut argmin_t = 0.0;
    for (k, (a, b)) in e0.iter().zip(&e1).enumerate() {
        let g = clamp_gap(b - a);
        if g < min_gap {
            min_gap = g;
            argmin_t = ts[k];
        }
    }
    if min_gap == 0.0 {
        log::warn!("ground level is degenerate at u = {argmin_t}; the adiabatic path has no unique ground state");
    }
    Ok(GapProfile {
        ts,
        e0,
        e1,
        min_gap,
        argmin_t,
    })
}

/// Gap profile of a QUBO model. With `normalize`, the spin model is first
/// rescaled so its couplings lie in `[-1, 1]` and biases in `[-2, 2]`, which
/// makes profiles of different penalty scales comparable.
pub fn gap_profile(model: &QuboModel, num_samples: usize, normalize: bool) -> Result<GapProfile> {
    let spin = to_spin(model)?;
    let spin = if normalize { spin.normalized() } else { spin };
    spectral_gap(&build_hamiltonians(&spin)?, num_samples)
}
