use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{SampleMeta, SampleSet};
use crate::error::{Error, Result};
use crate::qap::BinaryVector;
use crate::qubo::QuboModel;

/// Temperature program across sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TemperatureSchedule {
    /// Geometric decay from the largest sampled single-flip `|ΔE|` down to
    /// `10⁻³` of it.
    Auto,
    Geometric {
        t_hi: f64,
        t_lo: f64,
    },
    Fixed {
        t: f64,
    },
}

impl Default for TemperatureSchedule {
    fn default() -> Self {
        Self::Auto
    }
}

/// Sampled states used by [`TemperatureSchedule::Auto`].
const PROBE_STATES: usize = 64;
const PROBE_STREAM: u64 = u64::MAX;

/// Couplings `Q_ij + Q_ji` in dense row-major form and flip self-terms
/// `Q_ii + q_i`.
struct FlipData {
    dim: usize,
    pair: Vec<f64>,
    own: Vec<f64>,
}

impl FlipData {
    fn new(model: &QuboModel) -> Self {
        let q = model.q_matrix();
        let dim = model.dim();
        let mut pair = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                if i != j {
                    pair[i * dim + j] = q[(i, j)] + q[(j, i)];
                }
            }
        }
        let own = (0..dim).map(|i| q[(i, i)] + model.q_vector()[i]).collect();
        Self { dim, pair, own }
    }

    fn fields(&self, x: &[u8]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .filter(|&j| x[j] == 1)
                    .map(|j| self.pair[i * self.dim + j])
                    .sum()
            })
            .collect()
    }

    /// Energy change from flipping bit `i`.
    fn delta(&self, x: &[u8], field: &[f64], i: usize) -> f64 {
        let d = 1.0 - 2.0 * f64::from(x[i]);
        d * (self.own[i] + field[i])
    }

    fn flip(&self, x: &mut [u8], field: &mut [f64], i: usize) {
        let d = 1.0 - 2.0 * f64::from(x[i]);
        x[i] ^= 1;
        let row = &self.pair[i * self.dim..(i + 1) * self.dim];
        for (f, p) in field.iter_mut().zip(row) {
            *f += d * p;
        }
    }
}

fn resolve(schedule: TemperatureSchedule, data: &FlipData, seed: u64) -> Result<(f64, f64)> {
    let (hi, lo) = match schedule {
        TemperatureSchedule::Fixed { t } => (t, t),
        TemperatureSchedule::Geometric { t_hi, t_lo } => (t_hi, t_lo),
        TemperatureSchedule::Auto => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(PROBE_STREAM);
            let mut max = 0.0f64;
            for _ in 0..PROBE_STATES {
                let x: Vec<u8> = (0..data.dim).map(|_| rng.gen_range(0..=1)).collect();
                let field = data.fields(&x);
                for i in 0..data.dim {
                    max = max.max(data.delta(&x, &field, i).abs());
                }
            }
            // A flat landscape needs no temperature; any positive value works.
            let hi = if max > 0.0 { max } else { 1.0 };
            (hi, 1e-3 * hi)
        }
    };
    if !(hi.is_finite() && lo.is_finite() && hi > 0.0 && lo > 0.0 && lo <= hi) {
        return Err(Error::invalid(format!(
            "temperatures must satisfy 0 < T_lo ≤ T_hi, got {lo} and {hi}"
        )));
    }
    Ok((hi, lo))
}

fn one_run(data: &FlipData, temps: &[f64], seed: u64, run: u64) -> BinaryVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    let mut x: Vec<u8> = (0..data.dim).map(|_| rng.gen_range(0..=1)).collect();
    let mut field = data.fields(&x);
    for &t in temps {
        for i in 0..data.dim {
            let de = data.delta(&x, &field, i);
            if de <= 0.0 || rng.gen::<f64>() < (-de / t).exp() {
                data.flip(&mut x, &mut field, i);
            }
        }
    }
    BinaryVector::new(x).expect("bits are binary")
}

/// Single-flip Metropolis annealing. Every run starts from a uniformly random
/// state and draws from its own stream of the seeded generator, so the result
/// does not depend on the thread count.
pub fn simulated_annealing(
    model: &QuboModel,
    sweeps: usize,
    runs: usize,
    seed: u64,
    schedule: TemperatureSchedule,
) -> Result<SampleSet> {
    if sweeps == 0 || runs == 0 {
        return Err(Error::invalid("sweeps and runs must both be at least one"));
    }
    let data = FlipData::new(model);
    let (hi, lo) = resolve(schedule, &data, seed)?;
    let temps: Vec<f64> = if sweeps == 1 {
        vec![lo]
    } else {
        let ratio = lo / hi;
        (0..sweeps)
            .map(|k| hi * ratio.powf(k as f64 / (sweeps - 1) as f64))
            .collect()
    };
    let finals: Vec<BinaryVector> = (0..runs as u64)
        .into_par_iter()
        .map(|run| one_run(&data, &temps, seed, run))
        .collect();
    let meta = SampleMeta {
        source: "simulated_annealing".into(),
        model_hash: model.content_hash().ok(),
        seed: Some(seed),
        params: BTreeMap::from([
            ("sweeps".to_string(), sweeps as f64),
            ("runs".to_string(), runs as f64),
            ("t_hi".to_string(), hi),
            ("t_lo".to_string(), lo),
        ]),
    };
    Ok(SampleSet::from_states(model, finals, meta))
}
