//! Unconstrained binary quadratic models equivalent to a QAP.
//!
//! Three formulations are provided:
//!
//! * **baseline**: one global penalty `λ‖Ax − b‖²`;
//! * **row-wise**: a separate multiplier for each constraint row of `A`;
//! * **inserted**: the first row and column of `X` are eliminated, leaving
//!   `(n-1)²` variables plus exclusion and cardinality penalties.
//!
//! At `scale = 1` each multiplier sits a relative [`STRICTNESS_MARGIN`]
//! above its bound, which is enough for the minimizers of the model to be
//! exactly the optimal permutations. All constants are kept in
//! [`QuboModel::offset`], so model energies of feasible states equal the QAP
//! objective.

mod bounds;
mod constraints;
mod export;
mod report;
mod spin;

pub use bounds::{
    elimination_map, max_flip_influence, penalty_bounds, reduce_inserted, reduced_index, PenaltyBounds,
    ReducedObjective,
};
pub use constraints::{build_constraints, ConstraintSystem};
pub use export::{parse_sparse_text, QuboFile};
pub use report::{coupling_report, CouplingReport, ValueRange};
pub use spin::{to_spin, SpinModel};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::qap::{vec_index, BinaryVector, PermutationMatrix, QapInstance};

/// Relative inflation applied to every bound so the strict inequalities hold.
pub const STRICTNESS_MARGIN: f64 = 1e-6;

/// Largest model dimension accepted by [`brute_force_qubo`].
pub const MAX_EXHAUSTIVE_DIM: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    Baseline,
    #[serde(alias = "row-wise")]
    RowWise,
    Inserted,
}

impl Formulation {
    pub const ALL: [Formulation; 3] = [Formulation::Baseline, Formulation::RowWise, Formulation::Inserted];

    pub fn as_str(self) -> &'static str {
        match self {
            Formulation::Baseline => "baseline",
            Formulation::RowWise => "row_wise",
            Formulation::Inserted => "inserted",
        }
    }

    /// Number of binary variables for side length `n`.
    pub fn dim(self, n: usize) -> usize {
        match self {
            Formulation::Inserted => (n.max(1) - 1).pow(2),
            _ => n * n,
        }
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Formulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "baseline" => Ok(Formulation::Baseline),
            "row_wise" | "rowwise" => Ok(Formulation::RowWise),
            "inserted" => Ok(Formulation::Inserted),
            other => Err(Error::invalid(format!("unknown formulation `{other}`"))),
        }
    }
}

/// `xᵀ Q x + qᵀ x + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    #[serde(rename = "Q", with = "export::rows")]
    pub quad: DMatrix<f64>,
    #[serde(rename = "q", with = "export::vector")]
    pub linear: DVector<f64>,
    pub offset: f64,
}

impl QuadraticForm {
    pub fn zeros(dim: usize) -> Self {
        Self {
            quad: DMatrix::zeros(dim, dim),
            linear: DVector::zeros(dim),
            offset: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn energy_of_support(&self, ones: &[usize]) -> f64 {
        let mut e = 0.0;
        for &a in ones {
            for &b in ones {
                e += self.quad[(a, b)];
            }
            e += self.linear[a];
        }
        e + self.offset
    }

    fn add(&self, other: &QuadraticForm) -> QuadraticForm {
        QuadraticForm {
            quad: &self.quad + &other.quad,
            linear: &self.linear + &other.linear,
            offset: self.offset + other.offset,
        }
    }
}

/// An unconstrained binary quadratic model derived from a QAP.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboModel {
    formulation: Formulation,
    n: usize,
    scale: f64,
    bounds: Option<PenaltyBounds>,
    total: QuadraticForm,
    parts: Option<(QuadraticForm, QuadraticForm)>,
}

impl QuboModel {
    /// Assembles a model from explicit coefficients.
    pub fn from_parts(
        formulation: Formulation,
        n: usize,
        scale: f64,
        bounds: Option<PenaltyBounds>,
        data: QuadraticForm,
        penalty: QuadraticForm,
    ) -> Result<Self> {
        let dim = formulation.dim(n);
        for part in [&data, &penalty] {
            if part.dim() != dim || part.quad.nrows() != dim || part.quad.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: part.dim(),
                });
            }
        }
        let total = data.add(&penalty);
        Self::check_finite(&total)?;
        Ok(Self {
            formulation,
            n,
            scale,
            bounds,
            total,
            parts: Some((data, penalty)),
        })
    }

    /// A model known only by its combined coefficients.
    pub fn from_total(
        formulation: Formulation,
        n: usize,
        scale: f64,
        bounds: Option<PenaltyBounds>,
        total: QuadraticForm,
    ) -> Result<Self> {
        let dim = formulation.dim(n);
        if total.dim() != dim || total.quad.nrows() != dim || total.quad.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: total.dim(),
            });
        }
        Self::check_finite(&total)?;
        Ok(Self {
            formulation,
            n,
            scale,
            bounds,
            total,
            parts: None,
        })
    }

    fn check_finite(form: &QuadraticForm) -> Result<()> {
        if form.quad.iter().chain(form.linear.iter()).all(|v| v.is_finite()) && form.offset.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("model coefficients must be finite"))
        }
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn bounds(&self) -> Option<&PenaltyBounds> {
        self.bounds.as_ref()
    }

    /// Combined quadratic coefficients `Q`.
    pub fn q_matrix(&self) -> &DMatrix<f64> {
        &self.total.quad
    }

    /// Combined linear coefficients `q`.
    pub fn q_vector(&self) -> &DVector<f64> {
        &self.total.linear
    }

    pub fn offset(&self) -> f64 {
        self.total.offset
    }

    pub fn total(&self) -> &QuadraticForm {
        &self.total
    }

    /// Problem-data and penalty contributions, when known.
    pub fn parts(&self) -> Option<(&QuadraticForm, &QuadraticForm)> {
        self.parts.as_ref().map(|(d, p)| (d, p))
    }

    /// Multipliers actually applied: `scale · bound · (1 + margin)`.
    pub fn applied_lambdas(&self) -> Vec<f64> {
        let Some(b) = &self.bounds else {
            return Vec::new();
        };
        let f = self.scale * (1.0 + STRICTNESS_MARGIN);
        match self.formulation {
            Formulation::Baseline => vec![f * b.lambda_baseline],
            Formulation::RowWise => b.lambda_rows.iter().map(|l| f * l).collect(),
            Formulation::Inserted => b
                .lambda1
                .iter()
                .chain(std::iter::once(&b.lambda2))
                .map(|l| f * l)
                .collect(),
        }
    }

    /// `xᵀQx + qᵀx + offset`.
    pub fn energy(&self, x: &BinaryVector) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let ones: Vec<usize> = x.support().collect();
        Ok(self.total.energy_of_support(&ones))
    }

    /// Energy of the basis state whose bit `i` is variable `i`.
    pub fn energy_of_index(&self, z: u64) -> f64 {
        let ones: Vec<usize> = (0..self.dim()).filter(|&i| (z >> i) & 1 == 1).collect();
        self.total.energy_of_support(&ones)
    }

    /// Penalty contribution at `x`; zero on feasible states.
    pub fn penalty_energy(&self, x: &BinaryVector) -> Option<f64> {
        let (_, pen) = self.parts.as_ref()?;
        let ones: Vec<usize> = x.support().collect();
        Some(pen.energy_of_support(&ones))
    }

    /// Binary encoding of a permutation under this formulation.
    pub fn encode(&self, perm: &PermutationMatrix) -> BinaryVector {
        encode(self.formulation, perm)
    }
}

fn validate_scale(scale: f64) -> Result<()> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid(format!("penalty scale must be positive, got {scale}")));
    }
    if scale < 1.0 {
        log::warn!("penalty scale {scale} < 1 is outside the provably equivalent regime");
    }
    Ok(())
}

fn data_form(inst: &QapInstance) -> QuadraticForm {
    let sym = inst.symmetrize();
    QuadraticForm {
        quad: sym.w().clone(),
        linear: sym.c().clone(),
        offset: 0.0,
    }
}

/// Adds `λ (aᵀx − 1)²` for a 0/1 row `a` given by its support.
fn add_squared_residual(form: &mut QuadraticForm, support: &[usize], lambda: f64) {
    for &i in support {
        for &j in support {
            form.quad[(i, j)] += lambda;
        }
        form.linear[i] -= 2.0 * lambda;
    }
    form.offset += lambda;
}

/// `xᵀ(W + λAᵀA)x + (c − 2λAᵀb)ᵀx + λbᵀb`.
pub fn build_baseline(inst: &QapInstance, scale: f64) -> Result<QuboModel> {
    validate_scale(scale)?;
    let n = inst.n();
    let bounds = penalty_bounds(inst);
    let lambda = scale * bounds.lambda_baseline * (1.0 + STRICTNESS_MARGIN);
    let sys = build_constraints(n);
    let mut pen = QuadraticForm::zeros(n * n);
    for i in 0..sys.num_constraints() {
        add_squared_residual(&mut pen, &sys.support(i), lambda);
    }
    QuboModel::from_parts(Formulation::Baseline, n, scale, Some(bounds), data_form(inst), pen)
}

/// `xᵀWx + cᵀx + Σᵢ λᵢ ((Ax)ᵢ − bᵢ)²`.
pub fn build_row_wise(inst: &QapInstance, scale: f64) -> Result<QuboModel> {
    validate_scale(scale)?;
    let n = inst.n();
    let bounds = penalty_bounds(inst);
    let sys = build_constraints(n);
    let mut pen = QuadraticForm::zeros(n * n);
    for (i, bound) in bounds.lambda_rows.iter().enumerate() {
        let lambda = scale * bound * (1.0 + STRICTNESS_MARGIN);
        add_squared_residual(&mut pen, &sys.support(i), lambda);
    }
    QuboModel::from_parts(Formulation::RowWise, n, scale, Some(bounds), data_form(inst), pen)
}

/// `χ(j, k)`: reduced variables `j ≠ k` share a block `⌊·/(n-1)⌋` or a
/// residue `· mod (n-1)`.
pub fn chi(n: usize, j: usize, k: usize) -> bool {
    let side = n - 1;
    j != k && (j / side == k / side || j % side == k % side)
}

/// Reduced objective plus
/// `Σ_g λ₁ᵍ Σ_{j≠k on line g} x_j x_k + λ₂ (Σx − (n−1))(Σx − (n−2))`.
pub fn build_inserted(inst: &QapInstance, scale: f64) -> Result<QuboModel> {
    validate_scale(scale)?;
    let n = inst.n();
    let red = reduce_inserted(inst)?;
    let bounds = penalty_bounds(inst);
    let f = scale * (1.0 + STRICTNESS_MARGIN);
    let side = n - 1;
    let m = red.dim();

    let mut pen = QuadraticForm::zeros(m);
    for j in 0..m {
        for k in 0..m {
            if j == k {
                continue;
            }
            if j / side == k / side {
                pen.quad[(j, k)] += f * bounds.lambda1[j / side];
            } else if j % side == k % side {
                pen.quad[(j, k)] += f * bounds.lambda1[side + j % side];
            }
        }
    }
    // (S − (n−1))(S − (n−2)) with S² = Σx + Σ_{j≠k} x_j x_k.
    let lambda2 = f * bounds.lambda2;
    let nf = n as f64;
    for j in 0..m {
        for k in 0..m {
            if j != k {
                pen.quad[(j, k)] += lambda2;
            }
        }
        pen.linear[j] += lambda2 * (1.0 - (2.0 * nf - 3.0));
    }
    pen.offset += lambda2 * (nf - 1.0) * (nf - 2.0);

    let data = QuadraticForm {
        quad: red.w,
        linear: red.c,
        offset: red.constant,
    };
    QuboModel::from_parts(Formulation::Inserted, n, scale, Some(bounds), data, pen)
}

/// Dispatches on the formulation tag.
pub fn build(inst: &QapInstance, formulation: Formulation, scale: f64) -> Result<QuboModel> {
    match formulation {
        Formulation::Baseline => build_baseline(inst, scale),
        Formulation::RowWise => build_row_wise(inst, scale),
        Formulation::Inserted => build_inserted(inst, scale),
    }
}

/// Binary encoding of `perm`: `vec(X)` or, for the inserted formulation, the
/// lower-right `(n-1) × (n-1)` block in column-major order.
pub fn encode(formulation: Formulation, perm: &PermutationMatrix) -> BinaryVector {
    let full = crate::qap::vectorize(perm);
    if formulation != Formulation::Inserted {
        return full;
    }
    let n = perm.n();
    let bits = (1..n)
        .flat_map(|col| (1..n).map(move |row| (row, col)))
        .map(|(row, col)| full.get(vec_index(n, row, col)))
        .collect();
    BinaryVector::new(bits).expect("bits come from a binary vector")
}

/// Maps a model state back to a permutation; `Ok(None)` marks an infeasible
/// state.
pub fn decode(model: &QuboModel, x: &BinaryVector) -> Result<Option<PermutationMatrix>> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            got: x.len(),
        });
    }
    Ok(decode_bits(model.formulation, model.n, x))
}

pub(crate) fn decode_bits(formulation: Formulation, n: usize, x: &BinaryVector) -> Option<PermutationMatrix> {
    match formulation {
        Formulation::Baseline | Formulation::RowWise => PermutationMatrix::from_binary(n, x),
        Formulation::Inserted => {
            let mut full = vec![0i64; n * n];
            let mut total = 0i64;
            for col in 1..n {
                for row in 1..n {
                    let v = i64::from(x.get(reduced_index(n, row, col)));
                    full[vec_index(n, row, col)] = v;
                    total += v;
                }
            }
            for k in 1..n {
                let col_sum: i64 = (1..n).map(|i| full[vec_index(n, i, k)]).sum();
                let row_sum: i64 = (1..n).map(|j| full[vec_index(n, k, j)]).sum();
                full[vec_index(n, 0, k)] = 1 - col_sum;
                full[vec_index(n, k, 0)] = 1 - row_sum;
            }
            full[vec_index(n, 0, 0)] = 2 - n as i64 + total;
            if full.iter().any(|&v| v != 0 && v != 1) {
                return None;
            }
            let bits = BinaryVector::new(full.into_iter().map(|v| v as u8).collect()).ok()?;
            PermutationMatrix::from_binary(n, &bits)
        }
    }
}

/// Global minimum of a model over the whole hypercube, with every minimizer
/// (ascending by basis index). States within `tol` of the minimum count as
/// minimizers.
pub fn brute_force_qubo(model: &QuboModel, tol: f64) -> Result<(f64, Vec<BinaryVector>)> {
    let dim = model.dim();
    if dim > MAX_EXHAUSTIVE_DIM {
        return Err(Error::SizeCap {
            what: "exhaustive model dimension",
            limit: MAX_EXHAUSTIVE_DIM,
            got: dim,
        });
    }
    let count = 1u64 << dim;
    let energies: Vec<f64> = (0..count).into_par_iter().map(|z| model.energy_of_index(z)).collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers = energies
        .iter()
        .enumerate()
        .filter(|(_, &e)| e <= min + tol)
        .map(|(z, _)| BinaryVector::from_index(z as u64, dim))
        .collect();
    Ok((min, minimizers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qap::{brute_force_qap, for_each_permutation, vectorize};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn states(dim: usize) -> impl Iterator<Item = BinaryVector> {
        (0..1u64 << dim).map(move |z| BinaryVector::from_index(z, dim))
    }

    #[test]
    fn zero_baseline_is_flat() {
        let model = build_baseline(&QapInstance::zeros(2), 1.0).unwrap();
        assert_eq!(model.dim(), 4);
        assert!(model.q_matrix().iter().all(|&v| v == 0.0));
        assert!(model.q_vector().iter().all(|&v| v == 0.0));
        for x in states(4) {
            assert_eq!(model.energy(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn linear_baseline_minimizer() {
        let inst = QapInstance::linear(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let model = build_baseline(&inst, 1.0).unwrap();
        let (min, argmin) = brute_force_qubo(&model, 1e-12).unwrap();
        assert!(min.abs() < 1e-12);
        assert_eq!(argmin, vec![BinaryVector::new(vec![1, 0, 0, 1]).unwrap()]);
    }

    #[test]
    fn row_wise_penalty_alone_vanishes_on_permutations() {
        // With W = 0 and c = 0 all multipliers are zero, so use the penalty
        // structure with unit multipliers instead.
        let sys = build_constraints(3);
        let mut pen = QuadraticForm::zeros(9);
        for i in 0..6 {
            add_squared_residual(&mut pen, &sys.support(i), 1.0);
        }
        let model = QuboModel::from_parts(Formulation::RowWise, 3, 1.0, None, QuadraticForm::zeros(9), pen).unwrap();
        let (min, argmin) = brute_force_qubo(&model, 1e-12).unwrap();
        assert_eq!(min, 0.0);
        let mut perms = Vec::new();
        for_each_permutation(3, |a| {
            perms.push(vectorize(&PermutationMatrix::new(a.to_vec()).unwrap()))
        });
        perms.sort_by_key(|v| v.to_index());
        assert_eq!(argmin, perms);
    }

    #[test]
    fn uniform_costs_share_argmin_across_baseline_and_row_wise() {
        let inst = QapInstance::linear(2, vec![1.0; 4]).unwrap();
        let a = brute_force_qubo(&build_baseline(&inst, 1.0).unwrap(), 1e-9).unwrap();
        let b = brute_force_qubo(&build_row_wise(&inst, 1.0).unwrap(), 1e-9).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.1.len(), 2);
    }

    #[test]
    fn inserted_two_by_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = QapInstance::random_uniform(2, &mut rng);
        let model = build_inserted(&inst, 1.0).unwrap();
        assert_eq!(model.dim(), 1);
        let zero = decode(&model, &BinaryVector::zeros(1)).unwrap().unwrap();
        let one = decode(&model, &BinaryVector::ones(1)).unwrap().unwrap();
        assert_eq!(zero.assignment(), &[1, 0]);
        assert_eq!(one, PermutationMatrix::identity(2));
        assert!(!chi(2, 0, 0));
        assert!(matches!(
            build_inserted(&QapInstance::zeros(1), 1.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn chi_pattern_for_three() {
        let pairs: Vec<(usize, usize)> = (0..4)
            .flat_map(|j| (j + 1..4).map(move |k| (j, k)))
            .filter(|&(j, k)| chi(3, j, k))
            .collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn inserted_decode_examples() {
        let model = build_inserted(&QapInstance::zeros(3), 1.0).unwrap();
        assert_eq!(decode(&model, &BinaryVector::zeros(4)).unwrap(), None);
        let valid = states(4).filter(|x| decode(&model, x).unwrap().is_some()).count();
        assert_eq!(valid, 6);
        assert!(matches!(
            decode(&model, &BinaryVector::zeros(9)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn decode_inverts_encode() {
        let inst = QapInstance::zeros(4);
        for f in Formulation::ALL {
            let model = build(&inst, f, 1.0).unwrap();
            for_each_permutation(4, |a| {
                let p = PermutationMatrix::new(a.to_vec()).unwrap();
                assert_eq!(decode(&model, &model.encode(&p)).unwrap(), Some(p));
            });
        }
    }

    #[test]
    fn baseline_decode_identity() {
        let model = build_baseline(&QapInstance::zeros(2), 1.0).unwrap();
        let p = decode(&model, &BinaryVector::new(vec![1, 0, 0, 1]).unwrap()).unwrap();
        assert_eq!(p, Some(PermutationMatrix::identity(2)));
    }

    #[test]
    fn penalties_vanish_on_feasible_states_and_energies_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in 2..=4 {
            let inst = QapInstance::random_uniform(n, &mut rng);
            for f in Formulation::ALL {
                let model = build(&inst, f, 1.0).unwrap();
                for_each_permutation(n, |a| {
                    let p = PermutationMatrix::new(a.to_vec()).unwrap();
                    let x = model.encode(&p);
                    let pen = model.penalty_energy(&x).unwrap();
                    assert!(pen.abs() < 1e-9, "{f} n={n}: penalty {pen}");
                    let e = model.energy(&x).unwrap();
                    let f_x = inst.permutation_energy(&p);
                    assert!((e - f_x).abs() < 1e-9 * f_x.abs().max(1.0), "{f} n={n}: {e} vs {f_x}");
                });
            }
        }
    }

    #[test]
    fn random_three_equivalence_and_scale_monotonicity() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..5 {
            let inst = QapInstance::random_uniform(3, &mut rng);
            let (p_opt, f_opt) = brute_force_qap(&inst).unwrap();
            for f in Formulation::ALL {
                for scale in [1.0, 2.0, 10.0] {
                    let model = build(&inst, f, scale).unwrap();
                    let (min, argmin) = brute_force_qubo(&model, 1e-9).unwrap();
                    assert!((min - f_opt).abs() < 1e-9 * f_opt.abs().max(1.0), "{f} x{scale}");
                    assert_eq!(argmin.len(), 1);
                    assert_eq!(decode(&model, &argmin[0]).unwrap().as_ref(), Some(&p_opt));
                }
            }
        }
    }

    #[test]
    fn nonpositive_scale_is_rejected() {
        let inst = QapInstance::zeros(2);
        for s in [0.0, -1.0, f64::NAN] {
            assert!(build_baseline(&inst, s).is_err());
        }
    }

    #[test]
    fn formulation_parsing() {
        assert_eq!("row-wise".parse::<Formulation>().unwrap(), Formulation::RowWise);
        assert_eq!("Inserted".parse::<Formulation>().unwrap(), Formulation::Inserted);
        assert!("other".parse::<Formulation>().is_err());
    }
}
