//! Quadratic assignment problems over permutation matrices.
//!
//! A permutation matrix `X` is carried as its assignment array and flattened
//! with the column-major `vec` operator: entry `X[i, j]` lives at position
//! `j * n + i`. Every other module in the crate relies on this convention.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::path::Path;

use crate::error::{Error, Result};

/// Largest side length accepted by the factorial enumerators.
pub const MAX_BRUTE_FORCE_N: usize = 8;

/// Column-major position of `X[row, col]` in `vec(X)`.
#[inline]
pub fn vec_index(n: usize, row: usize, col: usize) -> usize {
    col * n + row
}

/// A vector over `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BinaryVector(Vec<u8>);

impl BinaryVector {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::invalid(format!(
                "entry {pos} of a binary vector is {}",
                bits[pos]
            )));
        }
        Ok(Self(bits))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1; len])
    }

    /// Reads the low `len` bits of `index`; bit `i` becomes entry `i`.
    pub fn from_index(index: u64, len: usize) -> Self {
        Self((0..len).map(|i| ((index >> i) & 1) as u8).collect())
    }

    /// Inverse of [`BinaryVector::from_index`].
    pub fn to_index(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| acc | (u64::from(b) << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Positions holding a one, ascending.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b == 1).map(|(i, _)| i)
    }
}

impl TryFrom<Vec<u8>> for BinaryVector {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<BinaryVector> for Vec<u8> {
    fn from(v: BinaryVector) -> Self {
        v.0
    }
}

impl std::fmt::Display for BinaryVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.0 {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// A permutation matrix stored as `assignment[col] = row` of the single one in
/// each column.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct PermutationMatrix {
    assignment: Vec<usize>,
}

impl PermutationMatrix {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let n = assignment.len();
        if n == 0 {
            return Err(Error::invalid("a permutation needs at least one entry"));
        }
        let mut seen = vec![false; n];
        for &row in &assignment {
            if row >= n || seen[row] {
                return Err(Error::invalid(format!("{assignment:?} is not a bijection on 0..{n}")));
            }
            seen[row] = true;
        }
        Ok(Self { assignment })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            assignment: (0..n).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Column-major positions of the ones, ordered by column.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        let n = self.n();
        self.assignment
            .iter()
            .enumerate()
            .map(move |(col, &row)| vec_index(n, row, col))
    }

    pub fn to_matrix(&self) -> DMatrix<u8> {
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for (col, &row) in self.assignment.iter().enumerate() {
            m[(row, col)] = 1;
        }
        m
    }

    /// Reads a column-major binary vector of length `n²`; `None` unless every
    /// row and column sums to one.
    pub fn from_binary(n: usize, x: &BinaryVector) -> Option<Self> {
        if x.len() != n * n {
            return None;
        }
        let mut assignment = vec![usize::MAX; n];
        let mut row_used = vec![false; n];
        for col in 0..n {
            for row in 0..n {
                if x.get(vec_index(n, row, col)) == 1 {
                    if assignment[col] != usize::MAX || row_used[row] {
                        return None;
                    }
                    assignment[col] = row;
                    row_used[row] = true;
                }
            }
            if assignment[col] == usize::MAX {
                return None;
            }
        }
        Some(Self { assignment })
    }
}

impl TryFrom<Vec<usize>> for PermutationMatrix {
    type Error = Error;

    fn try_from(assignment: Vec<usize>) -> Result<Self> {
        Self::new(assignment)
    }
}

impl From<PermutationMatrix> for Vec<usize> {
    fn from(p: PermutationMatrix) -> Self {
        p.assignment
    }
}

/// Column-major stacking of `X`.
pub fn vectorize(perm: &PermutationMatrix) -> BinaryVector {
    let n = perm.n();
    let mut bits = vec![0u8; n * n];
    for idx in perm.ones() {
        bits[idx] = 1;
    }
    BinaryVector(bits)
}

/// `min xᵀWx + cᵀx` over vectorized `n × n` permutation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct QapInstance {
    n: usize,
    w: DMatrix<f64>,
    c: DVector<f64>,
}

impl QapInstance {
    pub fn new(n: usize, w: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n must be positive"));
        }
        let dim = n * n;
        if w.nrows() != dim || w.ncols() != dim {
            return Err(Error::invalid(format!(
                "W must be {dim}x{dim} for n = {n}, got {}x{}",
                w.nrows(),
                w.ncols()
            )));
        }
        if c.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: c.len(),
            });
        }
        if !w.iter().chain(c.iter()).all(|v| v.is_finite()) {
            return Err(Error::invalid("W and c must be finite"));
        }
        Ok(Self { n, w, c })
    }

    pub fn zeros(n: usize) -> Self {
        let dim = n * n;
        Self {
            n,
            w: DMatrix::zeros(dim, dim),
            c: DVector::zeros(dim),
        }
    }

    /// Linear-only instance (`W = 0`).
    pub fn linear(n: usize, c: Vec<f64>) -> Result<Self> {
        let dim = n * n;
        Self::new(n, DMatrix::zeros(dim, dim), DVector::from_vec(c))
    }

    /// All entries of `W` and `c` i.i.d. uniform on `[-1, 1]`. `W` is drawn
    /// row by row, then `c`.
    pub fn random_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let dim = n * n;
        let w = DMatrix::from_row_iterator(dim, dim, (0..dim * dim).map(|_| rng.gen_range(-1.0..=1.0)));
        let c = DVector::from_iterator(dim, (0..dim).map(|_| rng.gen_range(-1.0..=1.0)));
        Self { n, w, c }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of binary variables, `n²`.
    pub fn dim(&self) -> usize {
        self.n * self.n
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn is_zero(&self) -> bool {
        self.w.iter().chain(self.c.iter()).all(|&v| v == 0.0)
    }

    pub fn is_symmetric(&self) -> bool {
        self.w == self.w.transpose()
    }

    /// `xᵀWx + cᵀx` with `W` as stored.
    pub fn energy(&self, x: &BinaryVector) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let ones: Vec<usize> = x.support().collect();
        Ok(self.energy_of_support(&ones))
    }

    pub fn permutation_energy(&self, perm: &PermutationMatrix) -> f64 {
        debug_assert_eq!(perm.n(), self.n);
        let ones: Vec<usize> = perm.ones().collect();
        self.energy_of_support(&ones)
    }

    fn energy_of_support(&self, ones: &[usize]) -> f64 {
        let mut e = 0.0;
        for &a in ones {
            for &b in ones {
                e += self.w[(a, b)];
            }
            e += self.c[a];
        }
        e
    }

    /// `W ← (W + Wᵀ)/2`.
    pub fn symmetrize(&self) -> Self {
        let w = (&self.w + self.w.transpose()) * 0.5;
        Self {
            n: self.n,
            w,
            c: self.c.clone(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceFile::from(self))?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }
}

/// Free-function form of [`QapInstance::energy`].
pub fn qap_energy(inst: &QapInstance, x: &BinaryVector) -> Result<f64> {
    inst.energy(x)
}

/// Free-function form of [`QapInstance::symmetrize`].
pub fn symmetrize(inst: &QapInstance) -> QapInstance {
    inst.symmetrize()
}

/// On-disk instance layout: `W` as a list of rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    #[serde(rename = "W")]
    pub w: Vec<Vec<f64>>,
    pub c: Vec<f64>,
}

impl From<&QapInstance> for InstanceFile {
    fn from(inst: &QapInstance) -> Self {
        Self {
            n: inst.n,
            w: matrix_rows(&inst.w),
            c: inst.c.iter().copied().collect(),
        }
    }
}

impl TryFrom<InstanceFile> for QapInstance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let dim = file.n * file.n;
        let w = matrix_from_rows(&file.w, dim, dim, "W")?;
        QapInstance::new(file.n, w, DVector::from_vec(file.c))
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize, field: &str) -> Result<DMatrix<f64>> {
    if rows.len() != nrows {
        return Err(Error::invalid(format!(
            "field `{field}`: expected {nrows} rows, got {}",
            rows.len()
        )));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::invalid(format!(
            "field `{field}`: row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.iter().flat_map(|r| r.iter().copied()),
    ))
}

/// Rearranges `perm` into the next permutation in lexicographic order.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Calls `f` on every permutation of `0..n` in lexicographic order.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        f(&perm);
        if !next_permutation(&mut perm) {
            break;
        }
    }
}

/// Permutations of `0..n` starting with `first`, in lexicographic order.
fn for_each_permutation_with_first(n: usize, first: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = std::iter::once(first).chain((0..n).filter(|&v| v != first)).collect();
    loop {
        f(&perm);
        if !next_permutation(&mut perm[1..]) {
            break;
        }
    }
}

/// Best and worst permutations of an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct PermutationExtremes {
    pub best: PermutationMatrix,
    pub best_energy: f64,
    pub worst: PermutationMatrix,
    pub worst_energy: f64,
}

#[derive(Clone)]
struct Candidate {
    best: (f64, Vec<usize>),
    worst: (f64, Vec<usize>),
}

impl Candidate {
    fn offer(&mut self, e: f64, perm: &[usize]) {
        if e < self.best.0 {
            self.best = (e, perm.to_vec());
        }
        if e > self.worst.0 {
            self.worst = (e, perm.to_vec());
        }
    }

    // Chunks arrive in lexicographic order, so equal energies keep `self`.
    fn merge(mut self, other: Candidate) -> Candidate {
        if other.best.0 < self.best.0 {
            self.best = other.best;
        }
        if other.worst.0 > self.worst.0 {
            self.worst = other.worst;
        }
        self
    }
}

/// Exhaustive minimum and maximum over all `n!` permutations. Ties go to the
/// lexicographically smallest assignment array; the result does not depend
/// on how the search is split across threads.
pub fn permutation_extremes(inst: &QapInstance) -> Result<PermutationExtremes> {
    let n = inst.n();
    if n > MAX_BRUTE_FORCE_N {
        return Err(Error::SizeCap {
            what: "brute-force side length",
            limit: MAX_BRUTE_FORCE_N,
            got: n,
        });
    }
    let empty = || Candidate {
        best: (f64::INFINITY, Vec::new()),
        worst: (f64::NEG_INFINITY, Vec::new()),
    };
    let energy = |perm: &[usize]| {
        let ones: Vec<usize> = perm
            .iter()
            .enumerate()
            .map(|(col, &row)| vec_index(n, row, col))
            .collect();
        inst.energy_of_support(&ones)
    };
    let chunks: Vec<Candidate> = (0..n)
        .into_par_iter()
        .map(|first| {
            let mut cand = empty();
            for_each_permutation_with_first(n, first, |p| cand.offer(energy(p), p));
            cand
        })
        .collect();
    let total = chunks.into_iter().fold(empty(), Candidate::merge);
    Ok(PermutationExtremes {
        best: PermutationMatrix::new(total.best.1)?,
        best_energy: total.best.0,
        worst: PermutationMatrix::new(total.worst.1)?,
        worst_energy: total.worst.0,
    })
}

/// Exact QAP minimizer by enumeration (`n ≤ 8`).
pub fn brute_force_qap(inst: &QapInstance) -> Result<(PermutationMatrix, f64)> {
    let ext = permutation_extremes(inst)?;
    Ok((ext.best, ext.best_energy))
}

/// Energy tolerance used when comparing against an optimum.
pub fn energy_tolerance(reference: f64) -> f64 {
    1e-9 * reference.abs().max(1.0)
}

/// Pairwise distances on two graphs with matching node counts.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceData {
    n: usize,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    linear_bias: Option<DMatrix<f64>>,
}

impl DistanceData {
    pub fn new(d1: DMatrix<f64>, d2: DMatrix<f64>, linear_bias: Option<DMatrix<f64>>) -> Result<Self> {
        let n = d1.nrows();
        if n == 0 {
            return Err(Error::invalid("distance matrices must be non-empty"));
        }
        for (name, d) in [("d1", &d1), ("d2", &d2)] {
            if d.nrows() != n || d.ncols() != n {
                return Err(Error::invalid(format!(
                    "{name} must be {n}x{n}, got {}x{}",
                    d.nrows(),
                    d.ncols()
                )));
            }
            let scale = d.amax().max(1.0);
            for i in 0..n {
                if d[(i, i)].abs() > 1e-12 * scale {
                    return Err(Error::invalid(format!("{name} has nonzero diagonal at {i}")));
                }
                for j in 0..n {
                    let v = d[(i, j)];
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::invalid(format!(
                            "{name}[{i},{j}] = {v} is not a nonnegative distance"
                        )));
                    }
                    if (v - d[(j, i)]).abs() > 1e-12 * scale {
                        return Err(Error::invalid(format!("{name} is not symmetric at ({i},{j})")));
                    }
                }
            }
        }
        if let Some(b) = &linear_bias {
            if b.nrows() != n || b.ncols() != n {
                return Err(Error::invalid(format!("linear_bias must be {n}x{n}")));
            }
            if !b.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("linear_bias must be finite"));
            }
        }
        Ok(Self { n, d1, d2, linear_bias })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    pub fn linear_bias(&self) -> Option<&DMatrix<f64>> {
        self.linear_bias.as_ref()
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: DistanceFile = serde_json::from_str(s)?;
        let n = file.n;
        let d1 = matrix_from_rows(&file.d1, n, n, "d1")?;
        let d2 = matrix_from_rows(&file.d2, n, n, "d2")?;
        let bias = file
            .linear_bias
            .as_ref()
            .map(|b| matrix_from_rows(b, n, n, "linear_bias"))
            .transpose()?;
        Self::new(d1, d2, bias)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceFile {
    pub n: usize,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear_bias: Option<Vec<Vec<f64>>>,
}

/// Isometric matching costs: the coupling between `X[i,j]` and `X[k,l]` is
/// `|d1(i,k) - d2(j,l)|`; `c` is `vec(linear_bias)` or zero.
pub fn isometric_cost(dist: &DistanceData) -> QapInstance {
    let n = dist.n;
    let dim = n * n;
    let mut w = DMatrix::zeros(dim, dim);
    for j in 0..n {
        for i in 0..n {
            let a = vec_index(n, i, j);
            for l in 0..n {
                for k in 0..n {
                    let b = vec_index(n, k, l);
                    w[(a, b)] = (dist.d1[(i, k)] - dist.d2[(j, l)]).abs();
                }
            }
        }
    }
    let c = match &dist.linear_bias {
        Some(bias) => DVector::from_iterator(dim, bias.iter().copied()),
        None => DVector::zeros(dim),
    };
    QapInstance { n, w, c }
}

/// Orders energies with NaN last; used wherever samples are ranked.
pub(crate) fn cmp_energy(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b).unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn swap2() -> PermutationMatrix {
        PermutationMatrix::new(vec![1, 0]).unwrap()
    }

    #[test]
    fn vectorize_small_cases() {
        assert_eq!(vectorize(&PermutationMatrix::identity(1)).bits(), &[1]);
        assert_eq!(vectorize(&PermutationMatrix::identity(2)).bits(), &[1, 0, 0, 1]);
        assert_eq!(vectorize(&swap2()).bits(), &[0, 1, 1, 0]);
    }

    #[test]
    fn permutation_rejects_non_bijection() {
        assert!(PermutationMatrix::new(vec![0, 0]).is_err());
        assert!(PermutationMatrix::new(vec![0, 2]).is_err());
        assert!(PermutationMatrix::new(vec![]).is_err());
    }

    #[test]
    fn binary_vector_rejects_non_binary() {
        assert!(BinaryVector::new(vec![0, 2]).is_err());
        let v = BinaryVector::from_index(0b1101, 4);
        assert_eq!(v.bits(), &[1, 0, 1, 1]);
        assert_eq!(v.to_index(), 0b1101);
    }

    #[test]
    fn linear_energy_examples() {
        let inst = QapInstance::linear(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let id = vectorize(&PermutationMatrix::identity(2));
        assert_eq!(inst.energy(&id).unwrap(), 0.0);
        assert_eq!(inst.energy(&vectorize(&swap2())).unwrap(), 2.0);
        assert!(matches!(
            inst.energy(&BinaryVector::zeros(3)),
            Err(Error::DimensionMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn all_ones_energy_is_total_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let inst = QapInstance::random_uniform(3, &mut rng);
        let mut expected = 0.0;
        for a in 0..9 {
            for b in 0..9 {
                expected += inst.w()[(a, b)];
            }
        }
        expected += inst.c().iter().sum::<f64>();
        let e = inst.energy(&BinaryVector::ones(9)).unwrap();
        assert!((e - expected).abs() < 1e-12);
    }

    #[test]
    fn brute_force_trivial_cases() {
        let inst = QapInstance::linear(2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let (p, e) = brute_force_qap(&inst).unwrap();
        assert_eq!(p, PermutationMatrix::identity(2));
        assert_eq!(e, 0.0);
        for n in 1..=5 {
            let (p, e) = brute_force_qap(&QapInstance::zeros(n)).unwrap();
            assert_eq!(p, PermutationMatrix::identity(n));
            assert_eq!(e, 0.0);
        }
        assert!(matches!(
            brute_force_qap(&QapInstance::zeros(9)),
            Err(Error::SizeCap { .. })
        ));
    }

    // Heap's algorithm visits permutations in a different order than the
    // lexicographic enumerator, so it serves as an independent path.
    fn heap_minimum(inst: &QapInstance) -> (Vec<usize>, f64) {
        fn rec(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == 1 {
                out.push(a.clone());
                return;
            }
            rec(k - 1, a, out);
            for i in 0..k - 1 {
                if k % 2 == 0 {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
                rec(k - 1, a, out);
            }
        }
        let n = inst.n();
        let mut all = Vec::new();
        rec(n, &mut (0..n).collect(), &mut all);
        all.sort();
        let mut best = (Vec::new(), f64::INFINITY);
        for p in all {
            let mut x = vec![0.0; n * n];
            for (col, &row) in p.iter().enumerate() {
                x[col * n + row] = 1.0;
            }
            let mut e = 0.0;
            for a in 0..n * n {
                e += inst.c()[a] * x[a];
                for b in 0..n * n {
                    e += x[a] * inst.w()[(a, b)] * x[b];
                }
            }
            if e < best.1 - 1e-12 {
                best = (p, e);
            }
        }
        best
    }

    #[test]
    fn brute_force_matches_independent_enumerator() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let inst = QapInstance::random_uniform(3, &mut rng);
            let (p, e) = brute_force_qap(&inst).unwrap();
            let (q, f) = heap_minimum(&inst);
            assert_eq!(p.assignment(), q.as_slice());
            assert!((e - f).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_is_a_lower_bound_on_every_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 1..=4 {
            let inst = QapInstance::random_uniform(n, &mut rng);
            let ext = permutation_extremes(&inst).unwrap();
            for_each_permutation(n, |a| {
                let p = PermutationMatrix::new(a.to_vec()).unwrap();
                let e = inst.permutation_energy(&p);
                assert!(ext.best_energy <= e && e <= ext.worst_energy);
            });
        }
    }

    #[test]
    fn permutation_count_is_factorial() {
        let mut count = 0;
        for_each_permutation(5, |_| count += 1);
        assert_eq!(count, 120);
    }

    #[test]
    fn symmetrize_examples() {
        let mut w = DMatrix::zeros(1, 1);
        w[(0, 0)] = 3.0;
        let inst = QapInstance::new(1, w.clone(), DVector::zeros(1)).unwrap();
        assert_eq!(inst.symmetrize(), inst);

        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 2.0;
        let inst = QapInstance::new(2, w, DVector::zeros(4)).unwrap();
        let s = inst.symmetrize();
        assert_eq!(s.w()[(0, 1)], 1.0);
        assert_eq!(s.w()[(1, 0)], 1.0);
        assert!(!inst.is_symmetric());
        assert!(s.is_symmetric());
    }

    #[test]
    fn symmetrize_preserves_every_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let inst = QapInstance::random_uniform(3, &mut rng);
        let sym = inst.symmetrize();
        for z in 0..512u64 {
            let x = BinaryVector::from_index(z, 9);
            let a = inst.energy(&x).unwrap();
            let b = sym.energy(&x).unwrap();
            assert!((a - b).abs() < 1e-12, "state {z}: {a} vs {b}");
        }
    }

    fn dist(n: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { f(i.min(j), i.max(j)) })
    }

    #[test]
    fn isometric_equal_distances_favour_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen(), rng.gen())).collect();
        let d = dist(4, |i, j| {
            ((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt()
        });
        let inst = isometric_cost(&DistanceData::new(d.clone(), d, None).unwrap());
        let (p, e) = brute_force_qap(&inst).unwrap();
        assert_eq!(p, PermutationMatrix::identity(4));
        assert_eq!(e, 0.0);
    }

    #[test]
    fn isometric_two_node_mismatch() {
        let d1 = dist(2, |_, _| 1.0);
        let d2 = dist(2, |_, _| 3.0);
        let inst = isometric_cost(&DistanceData::new(d1, d2, None).unwrap());
        assert_eq!(inst.permutation_energy(&PermutationMatrix::identity(2)), 4.0);
        assert_eq!(inst.permutation_energy(&swap2()), 4.0);
    }

    #[test]
    fn isometric_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts = |rng: &mut ChaCha8Rng| -> Vec<[f64; 2]> { (0..3).map(|_| [rng.gen(), rng.gen()]).collect() };
        let euclid = |p: &[[f64; 2]]| {
            dist(3, |i, j| {
                ((p[i][0] - p[j][0]).powi(2) + (p[i][1] - p[j][1]).powi(2)).sqrt()
            })
        };
        let a = pts(&mut rng);
        let b = pts(&mut rng);
        let (d1, d2) = (euclid(&a), euclid(&b));
        let inst = isometric_cost(&DistanceData::new(d1.clone(), d2.clone(), None).unwrap());
        let mut direct_min = f64::INFINITY;
        for_each_permutation(3, |perm| {
            // X[i, j] = 1 iff perm[j] == i
            let mut e = 0.0;
            for j in 0..3 {
                for l in 0..3 {
                    e += (d1[(perm[j], perm[l])] - d2[(j, l)]).abs();
                }
            }
            direct_min = direct_min.min(e);
        });
        let (_, e) = brute_force_qap(&inst).unwrap();
        assert!((e - direct_min).abs() < 1e-12);
    }

    #[test]
    fn distance_validation() {
        let mut d = dist(2, |_, _| 1.0);
        let ok = d.clone();
        d[(0, 1)] = 2.0;
        assert!(DistanceData::new(d, ok.clone(), None).is_err());
        let neg = dist(2, |_, _| -1.0);
        assert!(DistanceData::new(neg, ok.clone(), None).is_err());
        assert!(DistanceData::new(ok.clone(), dist(3, |_, _| 1.0), None).is_err());
    }

    #[test]
    fn instance_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = QapInstance::random_uniform(2, &mut rng);
        let s = inst.to_json_string().unwrap();
        assert_eq!(QapInstance::from_json_str(&s).unwrap(), inst);
        let bad = r#"{"n": 2, "W": [[0,0,0,0]], "c": [0,0,0,0]}"#;
        let err = QapInstance::from_json_str(bad).unwrap_err().to_string();
        assert!(err.contains("`W`"), "{err}");
    }
}
