use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::QuantumState;
use crate::error::{Error, Result};
use crate::qap::{brute_force_qap, cmp_energy, energy_tolerance, BinaryVector, PermutationMatrix, QapInstance};
use crate::qubo::{decode_bits, Formulation, QuboModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub bits: BinaryVector,
    pub energy: f64,
    pub count: u64,
    pub valid: bool,
}

/// Where a sample set came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub source: String,
    pub model_hash: Option<String>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

/// Histogram of measured or sampled states, sorted by `(energy, bits)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub formulation: Formulation,
    pub n: usize,
    pub entries: Vec<SampleEntry>,
    pub total: u64,
    #[serde(default)]
    pub meta: SampleMeta,
}

impl SampleSet {
    /// Aggregates raw basis indices (bit `i` of an index is variable `i`).
    pub fn from_indices(model: &QuboModel, indices: impl IntoIterator<Item = u64>, meta: SampleMeta) -> Self {
        let dim = model.dim();
        Self::from_states(
            model,
            indices.into_iter().map(|z| BinaryVector::from_index(z, dim)),
            meta,
        )
    }

    /// Aggregates states of the model's dimension.
    pub fn from_states(model: &QuboModel, states: impl IntoIterator<Item = BinaryVector>, meta: SampleMeta) -> Self {
        let mut counts: HashMap<BinaryVector, u64> = HashMap::new();
        for x in states {
            *counts.entry(x).or_default() += 1;
        }
        let entries = counts
            .into_iter()
            .map(|(bits, count)| SampleEntry {
                energy: model.energy(&bits).expect("state length matches the model"),
                valid: decode_bits(model.formulation(), model.n(), &bits).is_some(),
                bits,
                count,
            })
            .collect();
        Self::assemble(model, entries, meta)
    }

    fn assemble(model: &QuboModel, mut entries: Vec<SampleEntry>, meta: SampleMeta) -> Self {
        entries.sort_by(|a, b| cmp_energy(a.energy, b.energy).then_with(|| a.bits.cmp(&b.bits)));
        let total = entries.iter().map(|e| e.count).sum();
        Self {
            formulation: model.formulation(),
            n: model.n(),
            entries,
            total,
            meta,
        }
    }

    /// Highest count; ties go to the lower energy, then the smaller bit string.
    pub fn most_frequent(&self) -> Option<&SampleEntry> {
        self.entries.iter().min_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then_with(|| cmp_energy(a.energy, b.energy))
                .then_with(|| a.bits.cmp(&b.bits))
        })
    }

    pub fn lowest_energy(&self) -> Option<&SampleEntry> {
        self.entries.first()
    }

    pub fn valid_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.entries.iter().filter(|e| e.valid).map(|e| e.count).sum::<u64>() as f64 / self.total as f64
    }

    pub fn decode(&self, entry: &SampleEntry) -> Option<PermutationMatrix> {
        decode_bits(self.formulation, self.n, &entry.bits)
    }

    /// Counts grouped into `bins` equal-width energy bins. Columns:
    /// `energy_bin` (bin center), `count`, `valid_count`.
    pub fn histogram_csv(&self, bins: usize) -> String {
        let mut out = String::from("energy_bin,count,valid_count\n");
        if self.entries.is_empty() || bins == 0 {
            return out;
        }
        let lo = self.entries.first().unwrap().energy;
        let hi = self.entries.last().unwrap().energy;
        let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
        let mut rows = vec![(0u64, 0u64); bins];
        for e in &self.entries {
            let k = (((e.energy - lo) / width) as usize).min(bins - 1);
            rows[k].0 += e.count;
            if e.valid {
                rows[k].1 += e.count;
            }
        }
        for (k, (count, valid)) in rows.into_iter().enumerate() {
            let center = lo + (k as f64 + 0.5) * width;
            let _ = writeln!(out, "{center:?},{count},{valid}");
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let set: Self = serde_json::from_str(s)?;
        if set.entries.iter().map(|e| e.count).sum::<u64>() != set.total {
            return Err(Error::invalid("sample counts do not add up to the recorded total"));
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Draws `shots` basis states from `|amplitude|²`.
pub fn measure(state: &QuantumState, shots: usize, seed: u64, model: &QuboModel) -> Result<SampleSet> {
    if shots == 0 {
        return Err(Error::invalid("need at least one shot"));
    }
    if state.num_qubits() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: state.num_qubits(),
        });
    }
    let dist = WeightedIndex::new(state.probabilities()).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<u64> = (0..shots).map(|_| dist.sample(&mut rng) as u64).collect();
    let meta = SampleMeta {
        source: "measure".into(),
        model_hash: model.content_hash().ok(),
        seed: Some(seed),
        params: BTreeMap::from([("shots".to_string(), shots as f64)]),
    };
    Ok(SampleSet::from_indices(model, draws, meta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessProbability {
    /// Fraction of samples decoding to an optimal permutation.
    pub probability: f64,
    /// `1 / n!`.
    pub random_guess: f64,
    pub f_opt: f64,
}

pub fn success_probability(samples: &SampleSet, inst: &QapInstance) -> Result<SuccessProbability> {
    if inst.n() != samples.n {
        return Err(Error::DimensionMismatch {
            expected: samples.n,
            got: inst.n(),
        });
    }
    let (_, f_opt) = brute_force_qap(inst)?;
    let tol = energy_tolerance(f_opt);
    let hits: u64 = samples
        .entries
        .iter()
        .filter(|e| {
            samples
                .decode(e)
                .is_some_and(|p| (inst.permutation_energy(&p) - f_opt).abs() <= tol)
        })
        .map(|e| e.count)
        .sum();
    let probability = if samples.total == 0 {
        0.0
    } else {
        hits as f64 / samples.total as f64
    };
    let factorial: f64 = (1..=inst.n()).map(|k| k as f64).product();
    Ok(SuccessProbability {
        probability,
        random_guess: 1.0 / factorial,
        f_opt,
    })
}
