//! Seeded experiment suites over random instances: per-formulation solver
//! runs, energies shifted by the exact optimum, and aggregate tables.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

use crate::anneal::{
    evolve, evolve_trotter, measure, simulated_annealing, success_probability, AnnealSchedule, SampleMeta, SampleSet,
    TemperatureSchedule, MAX_EVOLVE_QUBITS,
};
use crate::error::{Error, Result};
use crate::provenance::sha256_hex;
use crate::qap::{
    energy_tolerance, isometric_cost, permutation_extremes, DistanceData, QapInstance, MAX_BRUTE_FORCE_N,
};
use crate::qubo::{brute_force_qubo, build, to_spin, Formulation, QuboModel, MAX_EXHAUSTIVE_DIM};
use crate::spectral::{build_hamiltonians, gap_profile, MAX_GAP_QUBITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    /// Exhaustive search over the QUBO hypercube.
    Brute,
    Sa,
    Schrodinger,
    Trotter,
}

impl Solver {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Brute => "brute",
            Self::Sa => "sa",
            Self::Schrodinger => "schrodinger",
            Self::Trotter => "trotter",
        }
    }
}

impl std::fmt::Display for Solver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(Self::Brute),
            "sa" => Ok(Self::Sa),
            "schrodinger" => Ok(Self::Schrodinger),
            "trotter" => Ok(Self::Trotter),
            _ => Err(Error::invalid(format!(
                "unknown solver `{s}` (expected brute, sa, schrodinger or trotter)"
            ))),
        }
    }
}

/// Parameters for all solvers; each solver reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub tau: f64,
    pub steps_per_unit: f64,
    /// Optional plateau `(u, fraction of τ)` in the anneal path.
    pub pause: Option<(f64, f64)>,
    pub slices: usize,
    pub shots: usize,
    pub sweeps: usize,
    pub runs: usize,
    pub temperature: TemperatureSchedule,
    /// Grid size for the spectral-gap minimum; `None` skips the gap.
    pub gap_samples: Option<usize>,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            tau: 100.0,
            steps_per_unit: 10.0,
            pause: None,
            slices: 512,
            shots: 500,
            sweeps: 1000,
            runs: 500,
            temperature: TemperatureSchedule::Auto,
            gap_samples: None,
        }
    }
}

impl SolverParams {
    pub fn schedule(&self) -> Result<AnnealSchedule> {
        let steps = (self.tau * self.steps_per_unit).ceil().max(1.0) as usize;
        match self.pause {
            None => AnnealSchedule::linear(self.tau, steps),
            Some((u, frac)) => AnnealSchedule::with_pause(self.tau, steps, u, frac),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub num_instances: usize,
    pub seed: u64,
    pub formulations: Vec<Formulation>,
    pub scales: Vec<f64>,
    #[serde(default)]
    pub sparsity: f64,
    pub solver: Solver,
    #[serde(default)]
    pub solver_params: SolverParams,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if self.num_instances == 0 {
            return Err(Error::invalid("the experiment has no instances"));
        }
        if self.formulations.is_empty() {
            return Err(Error::invalid("no formulations selected"));
        }
        if self.scales.is_empty() || self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("scales must be a nonempty list of positive numbers"));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::invalid(format!("sparsity {} outside [0, 1)", self.sparsity)));
        }
        if self.n > MAX_BRUTE_FORCE_N {
            return Err(Error::SizeCap {
                what: "n for the exact optimum",
                limit: MAX_BRUTE_FORCE_N,
                got: self.n,
            });
        }
        let p = &self.solver_params;
        for &f in &self.formulations {
            let dim = f.dim(self.n);
            let cap = match self.solver {
                Solver::Brute => Some((MAX_EXHAUSTIVE_DIM, "QUBO dimension for exhaustive search")),
                Solver::Schrodinger | Solver::Trotter => Some((MAX_EVOLVE_QUBITS, "qubit count for evolution")),
                Solver::Sa => None,
            };
            if let Some((limit, what)) = cap {
                if dim > limit {
                    return Err(Error::SizeCap { what, limit, got: dim });
                }
            }
            if p.gap_samples.is_some() && dim > MAX_GAP_QUBITS {
                return Err(Error::SizeCap {
                    what: "qubit count for the spectral gap",
                    limit: MAX_GAP_QUBITS,
                    got: dim,
                });
            }
        }
        match self.solver {
            Solver::Sa if p.sweeps == 0 || p.runs == 0 => Err(Error::invalid("sa needs sweeps ≥ 1 and runs ≥ 1")),
            Solver::Schrodinger | Solver::Trotter if p.shots == 0 => Err(Error::invalid("shots must be at least 1")),
            Solver::Trotter if p.slices == 0 => Err(Error::invalid("slices must be at least 1")),
            Solver::Schrodinger | Solver::Trotter => p.schedule().map(|_| ()),
            _ => Ok(()),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(s)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Protocols mirroring the paper's figures: `fig2` (gap versus penalty
    /// scale), `fig3` (simulated evolution on ten instances), `fig6`
    /// (success probability at n = 4) and `supp-sa` (simulated annealing).
    pub fn preset(name: &str) -> Result<Self> {
        let all = Formulation::ALL.to_vec();
        let spec = match name {
            "fig2" => Self {
                n: 3,
                num_instances: 10,
                seed: 2,
                formulations: all,
                scales: vec![1.0, 2.0, 3.0, 4.0, 5.0],
                sparsity: 0.0,
                solver: Solver::Brute,
                solver_params: SolverParams {
                    gap_samples: Some(64),
                    ..SolverParams::default()
                },
            },
            "fig3" => Self {
                n: 3,
                num_instances: 10,
                seed: 3,
                formulations: all,
                scales: vec![1.0],
                sparsity: 0.0,
                solver: Solver::Schrodinger,
                solver_params: SolverParams {
                    tau: 100.0,
                    shots: 500,
                    ..SolverParams::default()
                },
            },
            "fig6" => Self {
                n: 4,
                num_instances: 10,
                seed: 6,
                formulations: all,
                scales: vec![1.0],
                sparsity: 0.0,
                solver: Solver::Sa,
                solver_params: SolverParams {
                    runs: 500,
                    sweeps: 1000,
                    ..SolverParams::default()
                },
            },
            "supp-sa" => Self {
                n: 4,
                num_instances: 10,
                seed: 8,
                formulations: all,
                scales: vec![1.0],
                sparsity: 0.0,
                solver: Solver::Sa,
                solver_params: SolverParams {
                    runs: 5000,
                    sweeps: 1000,
                    ..SolverParams::default()
                },
            },
            _ => {
                return Err(Error::invalid(format!(
                    "unknown preset `{name}` (expected fig2, fig3, fig6 or supp-sa)"
                )))
            }
        };
        Ok(spec)
    }
}

pub const PRESETS: [&str; 4] = ["fig2", "fig3", "fig6", "supp-sa"];

/// SplitMix64 finalizer, used to derive independent seeds from a base seed
/// and a path of indices.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut x = base;
    for &p in path {
        x = x
            .wrapping_add(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        x ^= x >> 31;
    }
    x
}

/// Number of entries zeroed at sparsity `s` among the `n⁴ + n²` entries of
/// `W` and `c`.
pub fn zero_count(n: usize, sparsity: f64) -> usize {
    let total = n.pow(4) + n * n;
    // The small slack keeps exact fractions such as 0.5·272 from rounding down.
    ((sparsity * total as f64) + 1e-9).floor() as usize
}

/// Instance `i` draws from stream `i` of a generator seeded with `spec.seed`,
/// so instances do not depend on how many precede them.
pub fn generate_instances(spec: &ExperimentSpec) -> Vec<QapInstance> {
    (0..spec.num_instances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let inst = QapInstance::random_uniform(spec.n, &mut rng);
            if spec.sparsity <= 0.0 {
                return inst;
            }
            let n = spec.n;
            let nw = n.pow(4);
            let (mut w, mut c) = (inst.w().clone(), inst.c().clone());
            for pos in sample(&mut rng, nw + n * n, zero_count(n, spec.sparsity)) {
                if pos < nw {
                    // W is filled row by row.
                    w[(pos / (n * n), pos % (n * n))] = 0.0;
                } else {
                    c[pos - nw] = 0.0;
                }
            }
            QapInstance::new(n, w, c).expect("shapes are unchanged")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub formulation: Formulation,
    pub scale: f64,
    /// Energy of the most frequent sample's permutation minus `f_opt`; the
    /// worst permutation's value when that sample is infeasible.
    pub normalized_energy: f64,
    /// Whether the most frequent sample decodes to an optimal permutation.
    pub success: bool,
    /// Fraction of all samples decoding to an optimal permutation.
    pub success_probability: f64,
    pub valid_fraction: f64,
    pub min_gap: Option<f64>,
    pub model_hash: String,
    /// Hardware-only quantities with no simulator counterpart.
    pub chain_length: Option<f64>,
    pub chain_break_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub instance_hash: String,
    pub f_opt: f64,
    pub f_worst: f64,
    pub runs: Vec<RunRecord>,
    /// Energy supplied by an external method, for side-by-side tables.
    pub external_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub formulation: Formulation,
    pub scale: f64,
    pub mean_normalized_energy: f64,
    /// Fraction of instances whose most frequent sample is optimal.
    pub success_rate: f64,
    pub mean_success_probability: f64,
    pub mean_min_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub tool_version: String,
    pub spec: ExperimentSpec,
    pub spec_hash: String,
    pub random_guess: f64,
    pub instances: Vec<InstanceRecord>,
    pub aggregates: Vec<Aggregate>,
}

/// Priced outcome of one sample set against the exact extremes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub normalized_energy: f64,
    pub success: bool,
}

/// Prices the most frequent sample: its permutation's energy minus `f_opt`,
/// or `f_worst − f_opt` when it does not decode.
pub fn price_most_frequent(samples: &SampleSet, inst: &QapInstance, f_opt: f64, f_worst: f64) -> Outcome {
    let perm = samples.most_frequent().and_then(|e| samples.decode(e));
    match perm {
        Some(p) => {
            let e = inst.permutation_energy(&p) - f_opt;
            let e = if e.abs() <= energy_tolerance(f_opt) { 0.0 } else { e };
            Outcome {
                normalized_energy: e,
                success: e == 0.0,
            }
        }
        None => Outcome {
            normalized_energy: f_worst - f_opt,
            success: false,
        },
    }
}

/// Runs one solver on one model. `seed` drives every random choice.
pub fn solve_model(model: &QuboModel, solver: Solver, p: &SolverParams, seed: u64) -> Result<SampleSet> {
    match solver {
        Solver::Brute => {
            let t = model.total();
            let magnitude = t.quad.abs().sum() + t.linear.abs().sum() + t.offset.abs();
            let (min, minimizers) = brute_force_qubo(model, 1e-10 * magnitude.max(1.0))?;
            let meta = SampleMeta {
                source: "brute".into(),
                model_hash: model.content_hash().ok(),
                seed: None,
                params: [("min_energy".to_string(), min)].into(),
            };
            Ok(SampleSet::from_states(model, minimizers, meta))
        }
        Solver::Sa => simulated_annealing(model, p.sweeps, p.runs, seed, p.temperature),
        Solver::Schrodinger | Solver::Trotter => {
            let pair = build_hamiltonians(&to_spin(model)?)?;
            let sched = p.schedule()?;
            let state = if solver == Solver::Schrodinger {
                evolve(&pair, &sched)?
            } else {
                evolve_trotter(&pair, &sched, p.slices)?
            };
            let mut set = measure(&state, p.shots, seed, model)?;
            set.meta.source = solver.as_str().to_string();
            set.meta.params.insert("tau".into(), sched.tau());
            set.meta.params.insert("steps".into(), sched.steps() as f64);
            if solver == Solver::Trotter {
                set.meta.params.insert("slices".into(), p.slices as f64);
            }
            Ok(set)
        }
    }
}

fn run_instance(spec: &ExperimentSpec, index: usize, inst: &QapInstance) -> Result<InstanceRecord> {
    let ext = permutation_extremes(inst)?;
    let mut runs = Vec::new();
    for (fi, &f) in spec.formulations.iter().enumerate() {
        for (si, &scale) in spec.scales.iter().enumerate() {
            let model = build(inst, f, scale)?;
            let seed = derive_seed(spec.seed, &[index as u64, fi as u64, si as u64]);
            let samples = solve_model(&model, spec.solver, &spec.solver_params, seed)?;
            let outcome = price_most_frequent(&samples, inst, ext.best_energy, ext.worst_energy);
            let min_gap = match spec.solver_params.gap_samples {
                Some(k) => Some(gap_profile(&model, k, true)?.min_gap),
                None => None,
            };
            runs.push(RunRecord {
                formulation: f,
                scale,
                normalized_energy: outcome.normalized_energy,
                success: outcome.success,
                success_probability: success_probability(&samples, inst)?.probability,
                valid_fraction: samples.valid_fraction(),
                min_gap,
                model_hash: model.content_hash()?,
                chain_length: None,
                chain_break_fraction: None,
            });
        }
    }
    Ok(InstanceRecord {
        instance: index,
        instance_hash: sha256_hex(inst.to_json_string()?.as_bytes()),
        f_opt: ext.best_energy,
        f_worst: ext.worst_energy,
        runs,
        external_energy: None,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<BenchReport> {
    spec.validate()?;
    let instances = generate_instances(spec);
    let records = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| run_instance(spec, i, inst))
        .collect::<Result<Vec<_>>>()?;

    let mut aggregates = Vec::new();
    let count = records.len() as f64;
    for &f in &spec.formulations {
        for &scale in &spec.scales {
            let rows: Vec<&RunRecord> = records
                .iter()
                .flat_map(|r| r.runs.iter())
                .filter(|r| r.formulation == f && r.scale == scale)
                .collect();
            let mean = |g: &dyn Fn(&RunRecord) -> f64| rows.iter().map(|r| g(r)).sum::<f64>() / count;
            let mean_min_gap = rows
                .iter()
                .map(|r| r.min_gap)
                .collect::<Option<Vec<f64>>>()
                .map(|g| g.iter().sum::<f64>() / count);
            aggregates.push(Aggregate {
                formulation: f,
                scale,
                mean_normalized_energy: mean(&|r| r.normalized_energy),
                success_rate: mean(&|r| f64::from(u8::from(r.success))),
                mean_success_probability: mean(&|r| r.success_probability),
                mean_min_gap,
            });
        }
    }
    let factorial: f64 = (1..=spec.n).map(|k| k as f64).product();
    Ok(BenchReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        spec_hash: sha256_hex(serde_json::to_string(spec)?.as_bytes()),
        spec: spec.clone(),
        random_guess: 1.0 / factorial,
        instances: records,
        aggregates,
    })
}

impl BenchReport {
    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// One row per (instance, formulation, scale).
    pub fn runs_csv(&self) -> String {
        let mut out = String::from(
            "instance,formulation,scale,normalized_energy,success,success_probability,valid_fraction,min_gap\n",
        );
        for inst in &self.instances {
            for r in &inst.runs {
                let gap = r.min_gap.map(|g| format!("{g:?}")).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:?},{},{:?},{:?},{}",
                    inst.instance,
                    r.formulation,
                    r.scale,
                    r.normalized_energy,
                    r.success,
                    r.success_probability,
                    r.valid_fraction,
                    gap
                );
            }
        }
        out
    }

    /// One row per (formulation, scale).
    pub fn aggregates_csv(&self) -> String {
        let mut out = String::from(
            "formulation,scale,mean_normalized_energy,success_rate,mean_success_probability,mean_min_gap\n",
        );
        for a in &self.aggregates {
            let gap = a.mean_min_gap.map(|g| format!("{g:?}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{:?},{}",
                a.formulation, a.scale, a.mean_normalized_energy, a.success_rate, a.mean_success_probability, gap
            );
        }
        out
    }

    pub fn aggregate(&self, formulation: Formulation, scale: f64) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.formulation == formulation && a.scale == scale)
    }
}

/// Matching of `side²` images to the cells of a `side × side` grid by mean
/// color: `d1` is the Euclidean distance between colors, `d2` the Euclidean
/// distance between grid cells (cell `k` sits at row `k / side`, column
/// `k % side`).
pub fn mean_color_sorting_instance(colors: &[[f64; 3]], grid_side: usize) -> Result<QapInstance> {
    let n = grid_side * grid_side;
    if grid_side == 0 || colors.len() != n {
        return Err(Error::invalid(format!(
            "need {n} colors for a {grid_side}x{grid_side} grid, got {}",
            colors.len()
        )));
    }
    let d1 = DMatrix::from_fn(n, n, |i, k| {
        colors[i]
            .iter()
            .zip(&colors[k])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    });
    let d2 = DMatrix::from_fn(n, n, |j, l| {
        let (rj, cj) = ((j / grid_side) as f64, (j % grid_side) as f64);
        let (rl, cl) = ((l / grid_side) as f64, (l % grid_side) as f64);
        ((rj - rl).powi(2) + (cj - cl).powi(2)).sqrt()
    });
    Ok(isometric_cost(&DistanceData::new(d1, d2, None)?))
}
